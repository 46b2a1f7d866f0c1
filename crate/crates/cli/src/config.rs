//! Pipeline configuration: defaults, then the `--config` TOML file, then
//! command-line flags.

use crate::error::CliError;
use chrono::NaiveDate;
use recall_core::aggregate::AggregationParams;
use recall_core::dbscan::DbscanParams;
use recall_core::fixture::FixtureName;
use recall_core::openfda_client::{DEFAULT_BASE_URL, DEFAULT_MAX_PAGES, MAX_PAGE_SIZE};
use recall_core::report::{Format, DEFAULT_TOP_K};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FetchConfig {
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub max_pages: usize,
    pub page_size: usize,
    pub base_url: String,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            from: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"),
            to: NaiveDate::from_ymd_opt(2024, 4, 15).expect("valid date"),
            max_pages: DEFAULT_MAX_PAGES,
            page_size: MAX_PAGE_SIZE,
            base_url: DEFAULT_BASE_URL.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DbscanConfig {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanConfig {
    fn default() -> Self {
        let p = DbscanParams::default();
        Self {
            eps: p.eps,
            min_pts: p.min_pts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregationConfig {
    pub prefix_len: usize,
    pub theta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overrides: Option<PathBuf>,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        let p = AggregationParams::default();
        Self {
            prefix_len: p.prefix_len,
            theta: p.theta,
            overrides: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub top: usize,
    pub formats: Vec<Format>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            top: DEFAULT_TOP_K,
            formats: Format::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub cache_dir: PathBuf,
    pub out: PathBuf,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            cache_dir: PathBuf::from("cache"),
            out: PathBuf::from("out"),
        }
    }
}

/// Everything a run depends on. The API key is deliberately absent: it
/// comes from the flag or environment only and is never echoed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    pub fetch: FetchConfig,
    pub dbscan: DbscanConfig,
    pub aggregation: AggregationConfig,
    pub report: ReportConfig,
    pub paths: PathConfig,
}

/// Flag values; `None` leaves the config value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub max_pages: Option<usize>,
    pub page_size: Option<usize>,
    pub base_url: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub eps: Option<f64>,
    pub min_pts: Option<usize>,
    pub prefix_len: Option<usize>,
    pub theta: Option<f64>,
    pub overrides: Option<PathBuf>,
    pub top: Option<usize>,
    pub formats: Option<Vec<Format>>,
    pub fixture: Option<String>,
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {}", path.display(), e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: Overrides) {
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        set!(o.from => self.fetch.from);
        set!(o.to => self.fetch.to);
        set!(o.max_pages => self.fetch.max_pages);
        set!(o.page_size => self.fetch.page_size);
        set!(o.base_url => self.fetch.base_url);
        set!(o.cache_dir => self.paths.cache_dir);
        set!(o.out => self.paths.out);
        set!(o.eps => self.dbscan.eps);
        set!(o.min_pts => self.dbscan.min_pts);
        set!(o.prefix_len => self.aggregation.prefix_len);
        set!(o.theta => self.aggregation.theta);
        set!(o.top => self.report.top);
        set!(o.formats => self.report.formats);
        if o.overrides.is_some() {
            self.aggregation.overrides = o.overrides;
        }
        if o.fixture.is_some() {
            self.fixture = o.fixture;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.dbscan_params()?;
        self.aggregation_params()?;
        self.fixture_name()?;
        if self.report.top == 0 {
            return Err(CliError::Usage("--top must be at least 1".into()));
        }
        if self.report.formats.is_empty() {
            return Err(CliError::Usage("at least one report format is required".into()));
        }
        Ok(())
    }

    pub fn dbscan_params(&self) -> Result<DbscanParams, CliError> {
        Ok(DbscanParams::new(self.dbscan.eps, self.dbscan.min_pts)?)
    }

    pub fn aggregation_params(&self) -> Result<AggregationParams, CliError> {
        Ok(AggregationParams::new(
            self.aggregation.prefix_len,
            self.aggregation.theta,
        )?)
    }

    pub fn fixture_name(&self) -> Result<Option<FixtureName>, CliError> {
        self.fixture
            .as_deref()
            .map(|f| {
                FixtureName::parse(f)
                    .ok_or_else(|| CliError::Usage(format!("unknown fixture {f:?} (expected table2 or figure1)")))
            })
            .transpose()
    }
}
