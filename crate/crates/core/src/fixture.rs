//! Offline fixtures.
//!
//! `table2` is a synthetic 7000-record recall feed whose root causes follow
//! a reference set of 36 category case counts (6991 records), plus nine rows the
//! cleaning step must remove: three blank root causes, three exact
//! duplicates and three out-of-range dates. Dates, firms and product codes
//! are synthetic and deterministic.
//!
//! `figure1` is the ten-row merged sample, verbatim.

use crate::dataset::{merge_datasets, RecallRecord};
use crate::openfda_client::{ClassificationRecord, HttpResponse, PartialRecall, Transport};
use chrono::{Duration, NaiveDate};
use serde_json::{json, Value};
use std::cell::RefCell;
use url::Url;

/// Root-cause categories and case counts, in cluster order.
pub const TABLE2: [(&str, usize); 36] = [
    ("Other", 197),
    ("No Marketing Application", 45),
    ("Under Investigation by firm", 1699),
    ("Software design", 270),
    ("Radiation Control for Health and Safety Act", 43),
    ("Material/Component Contamination", 42),
    ("Device Design", 1046),
    ("Employee error", 94),
    ("Process control", 1030),
    ("Process change control", 125),
    ("Error in labelling", 98),
    ("Software Manufacturing/Software Deployment", 13),
    ("Component design/selection", 131),
    ("Software Design Change", 45),
    ("Labelling Change Control", 81),
    ("Labelling design", 108),
    ("Process design", 135),
    ("Incorrect or no expiration date", 23),
    ("Software change control", 16),
    ("Mixed-up of materials/components", 29),
    ("Component change control", 116),
    ("Unknown/Undetermined by firm", 165),
    ("Nonconforming Material/Component", 643),
    ("Packaging", 49),
    ("Labelling mix-ups", 34),
    ("Packaging process control", 135),
    ("Vendor change control", 99),
    ("Storage", 134),
    ("Equipment maintenance", 72),
    ("Pending", 51),
    ("Software design (manufacturing process)", 13),
    ("Use error", 33),
    ("Packaging change control", 49),
    ("Package design/selection", 18),
    ("Labelling False and Misleading", 14),
    ("Environmental control", 96),
];

pub const TABLE2_TOTAL: usize = 6991;
pub const TABLE2_RAW_TOTAL: usize = 7000;

pub fn date_from() -> NaiveDate {
    NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date")
}

pub fn date_to() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 4, 15).expect("valid date")
}

/// Rows of the `figure1` fixture: (code, date, firm, root cause, quantity, device, class).
pub const FIGURE1: [(&str, &str, &str, &str, &str, &str, &str); 10] = [
    (
        "FRN",
        "2018-01-02",
        "Smith Medical ASD Inc.",
        "Process design",
        "86 units",
        "Pump, Infusion",
        "2",
    ),
    (
        "FRN",
        "2018-01-05",
        "Repro-Med Systems, Inc.",
        "Nonconforming Material/Component",
        "",
        "Pump, Infusion",
        "2",
    ),
    (
        "FFA",
        "2018-01-05",
        "Repro-Med Systems, Inc.",
        "Nonconforming Material/Component",
        "",
        "Sw. Administration, Intravascular",
        "2",
    ),
    (
        "OSN",
        "2018-01-08",
        "Smith & Nephew, Inc.",
        "Under Investigation by firm",
        "",
        "Software For Diagnosis/Treatment",
        "2",
    ),
    (
        "EHD",
        "2018-01-09",
        "Panasonic Rental Corp.",
        "Device Design",
        "13,340 units",
        "Unit, X-Ray, Extraoral With Time",
        "2",
    ),
    (
        "KME",
        "2018-01-09",
        "",
        "Device Design",
        "153 cases, 30 units in each case",
        "Bedding, Disposable, Medical",
        "1",
    ),
    (
        "NPT",
        "2018-01-10",
        "Edwards Lifesciences, LLC",
        "Employee error",
        "1730 units",
        "Aortic Valve, Prosthetic, Percutaneously Deployed",
        "3",
    ),
    (
        "MKI",
        "2018-01-11",
        "Physio Control, Inc.",
        "Other",
        "3831 units",
        "Automated External Defibrillator (Non-Wearable)",
        "3",
    ),
    (
        "HWE",
        "2018-01-11",
        "The Anspach Effort, Inc.",
        "Under Investigation by firm",
        "1",
        "Instrument, Surgical Orthopedic, Ac Powered Motor And Accessory/Attachment",
        "1",
    ),
    (
        "KPE",
        "2018-01-11",
        "Baxter Healthcare Corporation",
        "Process control",
        "29,080 units",
        "Container, IV",
        "2",
    ),
];

pub fn figure1_partials() -> Vec<PartialRecall> {
    FIGURE1
        .iter()
        .map(|r| PartialRecall {
            product_code: r.0.into(),
            event_date_posted: r.1.into(),
            recalling_firm: r.2.into(),
            root_cause_description: r.3.into(),
            product_quantity: r.4.into(),
        })
        .collect()
}

pub fn figure1_classifications() -> Vec<ClassificationRecord> {
    let mut out: Vec<ClassificationRecord> = Vec::new();
    for r in &FIGURE1 {
        if out.iter().all(|c| c.product_code != r.0) {
            out.push(ClassificationRecord {
                product_code: r.0.into(),
                device_name: r.5.into(),
                device_class: r.6.into(),
            });
        }
    }
    out
}

pub fn figure1_records() -> Vec<RecallRecord> {
    merge_datasets(&figure1_partials(), &figure1_classifications()).0
}

const DEVICE_NAMES: [&str; 12] = [
    "Pump, Infusion",
    "Catheter, Intravascular",
    "System, X-Ray, Stationary",
    "Software For Diagnosis/Treatment",
    "Ventilator, Continuous",
    "Monitor, Physiological, Patient",
    "Instrument, Surgical, Orthopedic",
    "Container, IV",
    "Stent, Coronary",
    "Defibrillator, Automated External",
    "Glucose Test System",
    "Syringe, Piston",
];

const FIRM_STEMS: [&str; 10] = [
    "Northfield Medical",
    "Blue Harbor Devices",
    "Crestline Surgical",
    "Meridian Health Systems",
    "Oakridge Diagnostics",
    "Pioneer Infusion",
    "Summit Orthopedics",
    "Tidewater Imaging",
    "Vantage Cardio",
    "Westbrook Biomedical",
];

const CODE_COUNT: usize = 48;
const CLASSIFIED_CODES: usize = 44;

fn product_code(k: usize) -> String {
    let a = (b'A' + (k / 26) as u8) as char;
    let b = (b'A' + (k % 26) as u8) as char;
    format!("Q{a}{b}")
}

fn firm(k: usize) -> String {
    let stem = FIRM_STEMS[k % FIRM_STEMS.len()];
    match k % 3 {
        0 => format!("{stem}, Inc."),
        1 => format!("{stem} & Co."),
        _ => format!("{stem} LLC"),
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Root causes of the 6991 fixture records, in feed order: each category
/// repeated its case count, then spread by a fixed stride permutation.
pub fn table2_root_causes() -> Vec<&'static str> {
    let expanded: Vec<&str> = TABLE2
        .iter()
        .flat_map(|&(label, n)| std::iter::repeat_n(label, n))
        .collect();
    let n = expanded.len();
    let mut stride = 2654;
    while gcd(stride, n) != 1 {
        stride += 1;
    }
    (0..n).map(|j| expanded[(j * stride) % n]).collect()
}

fn recall_entry(i: usize, cause: Option<&str>, date: &str) -> Value {
    let code = product_code((i * 7) % CODE_COUNT);
    let mut entry = json!({
        "res_event_number": format!("{}", 80000 + i),
        "product_code": code,
        "event_date_posted": date,
        "recalling_firm": firm(i % 29),
        "product_quantity": format!("{} units", 10 + i),
    });
    if let Some(cause) = cause {
        entry["root_cause_description"] = Value::String(cause.to_string());
    }
    entry
}

/// The 7000 raw recall entries as the API would return them.
pub fn table2_recall_entries() -> Vec<Value> {
    let span = (date_to() - date_from()).num_days() as usize + 1;
    let mut entries: Vec<Value> = table2_root_causes()
        .into_iter()
        .enumerate()
        .map(|(i, cause)| {
            let date = date_from() + Duration::days(((i * 37) % span) as i64);
            recall_entry(i, Some(cause), &date.format("%Y-%m-%d").to_string())
        })
        .collect();
    let base = entries.len();
    let extras = [
        recall_entry(base, Some(""), "2019-03-04"),
        recall_entry(base + 1, Some("   "), "2020-06-07"),
        recall_entry(base + 2, None, "2021-09-10"),
        entries[0].clone(),
        entries[1].clone(),
        entries[2].clone(),
        recall_entry(base + 3, Some("Storage"), "2017-12-31"),
        recall_entry(base + 4, Some("Device Design"), "2024-04-16"),
        recall_entry(base + 5, Some("Other"), ""),
    ];
    for (j, extra) in extras.into_iter().enumerate() {
        entries.insert(700 * j + 350, extra);
    }
    entries
}

/// Classification entries for the fixture's product codes. Four codes are
/// left unclassified and one code appears twice.
pub fn table2_classification_entries() -> Vec<Value> {
    let mut out: Vec<Value> = (0..CLASSIFIED_CODES)
        .map(|k| {
            json!({
                "product_code": product_code(k),
                "device_name": DEVICE_NAMES[k % DEVICE_NAMES.len()],
                "device_class": ((k % 3) + 1).to_string(),
                "medical_specialty_description": "General Hospital",
            })
        })
        .collect();
    out.push(json!({
        "product_code": product_code(0),
        "device_name": "Duplicate Entry",
        "device_class": "3",
    }));
    out
}

fn figure1_entries() -> (Vec<Value>, Vec<Value>) {
    let recalls = figure1_partials()
        .into_iter()
        .map(|r| {
            let mut v = json!({
                "product_code": r.product_code,
                "event_date_posted": r.event_date_posted,
                "recalling_firm": r.recalling_firm,
                "root_cause_description": r.root_cause_description,
            });
            if !r.product_quantity.is_empty() {
                v["product_quantity"] = Value::String(r.product_quantity);
            }
            v
        })
        .collect();
    let classes = figure1_classifications()
        .into_iter()
        .map(|c| json!({"product_code": c.product_code, "device_name": c.device_name, "device_class": c.device_class}))
        .collect();
    (recalls, classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureName {
    Table2,
    Figure1,
}

impl FixtureName {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "table2" => Some(FixtureName::Table2),
            "figure1" => Some(FixtureName::Figure1),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FixtureName::Table2 => "table2",
            FixtureName::Figure1 => "figure1",
        }
    }

    pub fn base_url(self) -> Url {
        Url::parse(&format!("fixture://{}", self.name())).expect("valid fixture url")
    }
}

/// In-memory stand-in for the two openFDA endpoints. Honors `limit` and
/// `skip`, ignores `search`, and answers 404 `NOT_FOUND` past the end.
pub struct FixtureTransport {
    recalls: Vec<Value>,
    classifications: Vec<Value>,
    requests: RefCell<Vec<Url>>,
}

impl FixtureTransport {
    pub fn new(recalls: Vec<Value>, classifications: Vec<Value>) -> Self {
        Self {
            recalls,
            classifications,
            requests: RefCell::new(Vec::new()),
        }
    }

    pub fn named(name: FixtureName) -> Self {
        match name {
            FixtureName::Table2 => Self::new(table2_recall_entries(), table2_classification_entries()),
            FixtureName::Figure1 => {
                let (r, c) = figure1_entries();
                Self::new(r, c)
            }
        }
    }

    pub fn request_count(&self) -> usize {
        self.requests.borrow().len()
    }

    pub fn requests(&self) -> Vec<Url> {
        self.requests.borrow().clone()
    }
}

impl Transport for FixtureTransport {
    fn get(&self, url: &Url) -> Result<HttpResponse, String> {
        self.requests.borrow_mut().push(url.clone());
        let data = if url.path().ends_with("/device/recall.json") {
            &self.recalls
        } else if url.path().ends_with("/device/classification.json") {
            &self.classifications
        } else {
            return Ok(HttpResponse {
                status: 404,
                body: br#"{"error":{"code":"NOT_FOUND","message":"Not Found"}}"#.to_vec(),
            });
        };
        let param = |name: &str| -> usize {
            url.query_pairs()
                .find(|(k, _)| k == name)
                .and_then(|(_, v)| v.parse().ok())
                .unwrap_or(0)
        };
        let (limit, skip) = (param("limit").max(1), param("skip"));
        if skip >= data.len() {
            return Ok(HttpResponse {
                status: 404,
                body: br#"{"error":{"code":"NOT_FOUND","message":"No matches found!"}}"#.to_vec(),
            });
        }
        let results: Vec<Value> = data[skip..(skip + limit).min(data.len())].to_vec();
        let body = json!({
            "meta": {"results": {"skip": skip, "limit": limit, "total": data.len()}},
            "results": results,
        });
        Ok(HttpResponse {
            status: 200,
            body: serde_json::to_vec(&body).expect("fixture serializes"),
        })
    }
}
