pub mod instances;
pub mod oracles;
