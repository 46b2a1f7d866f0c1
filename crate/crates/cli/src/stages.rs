//! The pipeline stages. Each one reads the previous stage's artifact from
//! disk and writes its own artifact plus a `<stage>.meta.json` sidecar.

use crate::config::PipelineConfig;
use crate::error::CliError;
use chrono::{DateTime, Utc};
use recall_core::aggregate::{aggregate_with_overrides, GroupFile, Overrides};
use recall_core::dataset::{self, clean, merge_datasets, CleaningRules, RecallRecord};
use recall_core::dbscan::{cluster_root_causes, ClusterFile};
use recall_core::fixture::FixtureTransport;
use recall_core::openfda_client::{
    parse_classification_page, parse_recall_page, read_cached_pages, Endpoint, FetchSpec, Fetcher, HttpTransport,
    RawPage, Transport,
};
use recall_core::report::{render, ReportModel};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use url::Url;

pub const DATASET_FILE: &str = "dataset.csv";
pub const CLEANING_REPORT_FILE: &str = "cleaning_report.json";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const GROUPS_FILE: &str = "groups.json";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.toml";

/// A configured run. The API key lives here rather than in the config so it
/// never reaches the echoed config file.
pub struct Run {
    pub config: PipelineConfig,
    pub api_key: Option<String>,
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct StageMeta {
    stage: &'static str,
    tool_version: &'static str,
    parameters: Value,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    generated_at: String,
}

fn digest(path: impl Into<String>, bytes: &[u8]) -> FileDigest {
    FileDigest {
        path: path.into(),
        sha256: hex::encode(Sha256::digest(bytes)),
    }
}

/// `SOURCE_DATE_EPOCH` pins the sidecar timestamp for reproducible builds.
fn generated_at() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0))
        .unwrap_or_else(Utc::now);
    now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("artifact serializes");
    out.push(b'\n');
    out
}

impl Run {
    pub fn new(config: PipelineConfig, api_key: Option<String>) -> Self {
        Self { config, api_key }
    }

    fn out_dir(&self) -> &Path {
        &self.config.paths.out
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir().join(name)
    }

    fn ensure_out_dir(&self) -> Result<(), CliError> {
        fs::create_dir_all(self.out_dir())
            .map_err(|e| CliError::Output(format!("cannot create {}: {e}", self.out_dir().display())))
    }

    fn write_out(&self, name: &str, bytes: &[u8]) -> Result<FileDigest, CliError> {
        let path = self.out_path(name);
        fs::write(&path, bytes).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
        Ok(digest(name, bytes))
    }

    fn read_input(&self, name: &str) -> Result<Vec<u8>, CliError> {
        let path = self.out_path(name);
        fs::read(&path).map_err(|e| {
            CliError::Data(format!(
                "missing input {}: {e} (run the previous stage first)",
                path.display()
            ))
        })
    }

    fn write_meta(
        &self,
        stage: &'static str,
        parameters: Value,
        inputs: Vec<FileDigest>,
        outputs: Vec<FileDigest>,
    ) -> Result<(), CliError> {
        let meta = StageMeta {
            stage,
            tool_version: env!("CARGO_PKG_VERSION"),
            parameters,
            inputs,
            outputs,
            generated_at: generated_at(),
        };
        self.write_out(&format!("{stage}.meta.json"), &pretty_json(&meta))?;
        Ok(())
    }

    pub fn echo_config(&self) -> Result<(), CliError> {
        self.ensure_out_dir()?;
        self.write_out(EFFECTIVE_CONFIG_FILE, self.config.to_toml().as_bytes())?;
        Ok(())
    }

    fn base_url(&self) -> Result<Url, CliError> {
        match self.config.fixture_name()? {
            Some(f) => Ok(f.base_url()),
            None => Url::parse(&self.config.fetch.base_url)
                .map_err(|e| CliError::Usage(format!("invalid base URL {:?}: {e}", self.config.fetch.base_url))),
        }
    }

    fn spec(&self, endpoint: Endpoint) -> FetchSpec {
        let f = &self.config.fetch;
        FetchSpec {
            endpoint,
            date_from: f.from,
            date_to: f.to,
            page_size: f.page_size,
            max_pages: f.max_pages,
            api_key: self.api_key.clone(),
        }
    }

    fn digest_pages(endpoint: Endpoint, pages: &[RawPage]) -> Vec<FileDigest> {
        pages
            .iter()
            .map(|p| digest(format!("cache:{}/{}.json", endpoint.name(), p.page_index), &p.payload))
            .collect()
    }

    pub fn fetch(&self) -> Result<String, CliError> {
        self.ensure_out_dir()?;
        let fixture = self.config.fixture_name()?;
        let transport: Box<dyn Transport> = match fixture {
            Some(name) => Box::new(FixtureTransport::named(name)),
            None => Box::new(HttpTransport::new().map_err(CliError::Network)?),
        };
        let mut fetcher = Fetcher::new(transport.as_ref(), self.base_url()?);
        if fixture.is_some() {
            fetcher.clock = || DateTime::<Utc>::UNIX_EPOCH;
        }
        let mut outputs = Vec::new();
        let mut summary = Vec::new();
        for endpoint in [Endpoint::Recall, Endpoint::Classification] {
            let pages = fetcher.fetch_pages(&self.spec(endpoint), &self.config.paths.cache_dir)?;
            let records: usize = pages.iter().map(|p| p.record_count).sum();
            summary.push(format!("{endpoint}: {} pages, {records} records", pages.len()));
            outputs.extend(Self::digest_pages(endpoint, &pages));
        }
        let f = &self.config.fetch;
        self.write_meta(
            "fetch",
            json!({
                "source": self.base_url()?.as_str(),
                "from": f.from, "to": f.to, "page_size": f.page_size, "max_pages": f.max_pages,
            }),
            Vec::new(),
            outputs,
        )?;
        Ok(format!("fetch: {}", summary.join("; ")))
    }

    pub fn build(&self) -> Result<String, CliError> {
        self.ensure_out_dir()?;
        let base = self.base_url()?;
        let cache = &self.config.paths.cache_dir;
        let recall_pages = read_cached_pages(&self.spec(Endpoint::Recall), &base, cache)?;
        let class_pages = read_cached_pages(&self.spec(Endpoint::Classification), &base, cache)?;
        let mut recalls = Vec::new();
        for p in &recall_pages {
            recalls.extend(parse_recall_page(p)?);
        }
        let mut classes = Vec::new();
        for p in &class_pages {
            classes.extend(parse_classification_page(p)?);
        }
        let (merged, stats) = merge_datasets(&recalls, &classes);
        let rules = CleaningRules {
            date_from: self.config.fetch.from,
            date_to: self.config.fetch.to,
        };
        let (records, mut report) = clean(&merged, &rules);
        report.unmatched_product_codes = stats.unmatched_product_codes;

        let mut csv = Vec::new();
        dataset::write_dataset_to(&records, &mut csv)?;
        let outputs = vec![
            self.write_out(DATASET_FILE, &csv)?,
            self.write_out(CLEANING_REPORT_FILE, &pretty_json(&report))?,
        ];
        let mut inputs = Self::digest_pages(Endpoint::Recall, &recall_pages);
        inputs.extend(Self::digest_pages(Endpoint::Classification, &class_pages));
        self.write_meta(
            "dataset",
            json!({
                "date_from": rules.date_from, "date_to": rules.date_to,
                "duplicate_classification_codes": stats.duplicate_classification_codes,
            }),
            inputs,
            outputs,
        )?;
        Ok(format!(
            "build: {} raw recall records -> {} cleaned records ({} blank root cause, {} duplicates, {} date outliers)",
            recalls.len(),
            records.len(),
            report.dropped_null_root_cause,
            report.dropped_duplicates,
            report.dropped_date_outliers
        ))
    }

    fn load_dataset(&self) -> Result<(Vec<RecallRecord>, FileDigest), CliError> {
        let bytes = self.read_input(DATASET_FILE)?;
        let records = dataset::read_dataset_from(bytes.as_slice())?;
        Ok((records, digest(DATASET_FILE, &bytes)))
    }

    pub fn cluster(&self) -> Result<String, CliError> {
        self.ensure_out_dir()?;
        let params = self.config.dbscan_params()?;
        let (records, input) = self.load_dataset()?;
        if records.is_empty() {
            return Err(CliError::Data(format!(
                "{} contains no records; nothing to cluster",
                self.out_path(DATASET_FILE).display()
            )));
        }
        let labels: Vec<&str> = records.iter().map(|r| r.root_cause_description.as_str()).collect();
        let clustering = cluster_root_causes(&labels, params)?;
        let file = clustering.to_file(params);
        let output = self.write_out(CLUSTERS_FILE, &pretty_json(&file))?;
        self.write_meta("clusters", json!(params), vec![input], vec![output])?;
        Ok(format!(
            "cluster: {} clusters covering {} records, {} noise records",
            file.cluster_count,
            clustering.clustered_total(),
            clustering.noise_total()
        ))
    }

    fn load_clusters(&self) -> Result<(ClusterFile, FileDigest), CliError> {
        let bytes = self.read_input(CLUSTERS_FILE)?;
        let file: ClusterFile = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Data(format!("invalid {}: {e}", self.out_path(CLUSTERS_FILE).display())))?;
        Ok((file, digest(CLUSTERS_FILE, &bytes)))
    }

    pub fn aggregate(&self) -> Result<String, CliError> {
        self.ensure_out_dir()?;
        let params = self.config.aggregation_params()?;
        let (clusters, mut inputs) = self.load_clusters().map(|(f, d)| (f, vec![d]))?;
        let overrides = match &self.config.aggregation.overrides {
            Some(path) => {
                let o = Overrides::load(path)?;
                let bytes = fs::read(path).unwrap_or_default();
                inputs.push(digest(path.display().to_string(), &bytes));
                o
            }
            None => Overrides::default(),
        };
        let groups = aggregate_with_overrides(&clusters.summaries(), params, &overrides)?;
        let file = GroupFile::new(params, groups);
        let output = self.write_out(GROUPS_FILE, &pretty_json(&file))?;
        self.write_meta(
            "groups",
            json!({"params": params, "overrides": overrides}),
            inputs,
            vec![output],
        )?;
        Ok(format!(
            "aggregate: {} clusters -> {} groups",
            clusters.cluster_count, file.group_count
        ))
    }

    pub fn report(&self) -> Result<String, CliError> {
        self.ensure_out_dir()?;
        let (records, dataset_digest) = self.load_dataset()?;
        let (clusters, clusters_digest) = self.load_clusters()?;
        let bytes = self.read_input(GROUPS_FILE)?;
        let groups: GroupFile = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Data(format!("invalid {}: {e}", self.out_path(GROUPS_FILE).display())))?;
        let noise: usize = clusters.noise.iter().map(|n| n.count).sum();
        let model = ReportModel::build(
            &records,
            &clusters.summaries(),
            &groups.groups,
            noise,
            self.config.report.top,
        )?;
        let mut outputs = Vec::new();
        for &format in &self.config.report.formats {
            outputs.push(self.write_out(&format!("report.{}", format.extension()), &render(&model, format))?);
        }
        self.write_meta(
            "report",
            json!({"top": self.config.report.top, "formats": self.config.report.formats}),
            vec![dataset_digest, clusters_digest, digest(GROUPS_FILE, &bytes)],
            outputs,
        )?;
        let top = &model.before[0];
        Ok(format!(
            "report: top initiator {:?} with {} cases ({:.1}% of {} clustered, {:.1}% of {} records); rank 2 after aggregation: {} ({})",
            top.label.display(),
            top.count,
            top.share * 100.0,
            model.metadata.clustered_records,
            model.metadata.top_share_of_dataset.unwrap_or(0.0) * 100.0,
            model.metadata.dataset_records,
            model.after.get(1).map(|e| e.label.display()).unwrap_or_default(),
            model.after.get(1).map(|e| e.count).unwrap_or_default(),
        ))
    }

    pub fn pipeline(&self) -> Result<Vec<String>, CliError> {
        Ok(vec![
            self.fetch()?,
            self.build()?,
            self.cluster()?,
            self.aggregate()?,
            self.report()?,
        ])
    }
}
