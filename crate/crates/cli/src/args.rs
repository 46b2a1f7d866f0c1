use crate::config::{Overrides, PipelineConfig};
use crate::error::CliError;
use crate::stages::Run;
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use recall_core::openfda_client::API_KEY_ENV;
use recall_core::report::Format;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "recall-initiators",
    version,
    about = "Cluster and rank openFDA device recall root causes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Download recall and classification pages into the cache
    Fetch,
    /// Merge and clean cached pages into dataset.csv
    Build,
    /// Cluster root-cause descriptions into clusters.json
    Cluster,
    /// Merge clusters with similar prefixes into groups.json
    Aggregate,
    /// Render ranked reports from the dataset, clusters and groups
    Report,
    /// Run every stage in order
    Pipeline,
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// TOML config file; flags take precedence over its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// First event_date_posted to keep (YYYY-MM-DD)
    #[arg(long, global = true)]
    pub from: Option<NaiveDate>,
    /// Last event_date_posted to keep (YYYY-MM-DD)
    #[arg(long, global = true)]
    pub to: Option<NaiveDate>,
    #[arg(long, global = true)]
    pub max_pages: Option<usize>,
    #[arg(long, global = true)]
    pub page_size: Option<usize>,
    #[arg(long, global = true)]
    pub base_url: Option<String>,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Output directory for artifacts
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub min_pts: Option<usize>,
    #[arg(long, global = true)]
    pub prefix_len: Option<usize>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// JSON file with forced merge/split label pairs
    #[arg(long, global = true)]
    pub overrides: Option<PathBuf>,
    /// Number of ranked entries in the comparison table
    #[arg(long, global = true)]
    pub top: Option<usize>,
    /// Comma-separated report formats: markdown, csv, json, svg-bars
    #[arg(long, global = true, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
    /// Serve requests from a bundled fixture instead of the network (table2, figure1)
    #[arg(long, global = true)]
    pub fixture: Option<String>,
    #[arg(long, global = true, env = API_KEY_ENV, hide_env_values = true)]
    pub api_key: Option<String>,
}

impl Flags {
    pub fn into_run(self) -> Result<Run, CliError> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        config.apply(Overrides {
            from: self.from,
            to: self.to,
            max_pages: self.max_pages,
            page_size: self.page_size,
            base_url: self.base_url,
            cache_dir: self.cache_dir,
            eps: self.eps,
            min_pts: self.min_pts,
            prefix_len: self.prefix_len,
            theta: self.theta,
            overrides: self.overrides,
            top: self.top,
            formats: self.format,
            fixture: self.fixture,
            out: self.out,
        });
        config.validate()?;
        let api_key = self.api_key.filter(|k| !k.trim().is_empty());
        Ok(Run::new(config, api_key))
    }
}

/// Runs one command and returns its progress lines.
pub fn execute(cli: Cli) -> Result<Vec<String>, CliError> {
    let run = cli.flags.into_run()?;
    run.echo_config()?;
    match cli.command {
        Command::Fetch => run.fetch().map(|l| vec![l]),
        Command::Build => run.build().map(|l| vec![l]),
        Command::Cluster => run.cluster().map(|l| vec![l]),
        Command::Aggregate => run.aggregate().map(|l| vec![l]),
        Command::Report => run.report().map(|l| vec![l]),
        Command::Pipeline => run.pipeline(),
    }
}
