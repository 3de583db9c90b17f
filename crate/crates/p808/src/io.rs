//! File formats: CSV tables, JSON documents, clip lists, ratings and WAV.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use p808_core::builder::Pcm;
use p808_core::certificate::CertificateKey;
use p808_core::cleansing::{CleansingVerdict, Criterion, CriterionFlags, Flag};
use p808_core::config::{ExperimentConfig, SecretRef};
use p808_core::model::{PresentationOrder, Rating, Role, Stimulus, Timestamp};
use p808_core::table::Table;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Environment variable consulted when a config names no secret source.
pub const SECRET_ENV: &str = "P808_SECRET";

pub fn parse_csv(reader: impl Read) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut table = Table::new(header);
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("csv record {}", i + 1))?;
        table.rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(table)
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_csv(f).with_context(|| format!("reading {}", path.display()))
}

/// Writes with every field quoted, so URLs and free text survive any reader.
pub fn csv_bytes(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_writer(Vec::new());
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

pub fn write_csv(path: &Path, table: &Table) -> Result<()> {
    write_file(path, &csv_bytes(table)?)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = read_json(path)?;
    config
        .validate()
        .with_context(|| format!("validating {}", path.display()))?;
    Ok(config)
}

pub fn resolve_secret(secret: &SecretRef) -> Result<Vec<u8>> {
    match secret {
        SecretRef::Inline(s) => Ok(s.as_bytes().to_vec()),
        SecretRef::Env(var) => {
            let var = if var.is_empty() { SECRET_ENV } else { var.as_str() };
            std::env::var(var)
                .map(String::into_bytes)
                .map_err(|_| anyhow!("secret variable {var} is not set"))
        }
    }
}

pub fn certificate_key(config: &ExperimentConfig) -> Result<CertificateKey> {
    Ok(CertificateKey::derive(
        &resolve_secret(&config.secret)?,
        &config.experiment_id,
    ))
}

/// Locale-independent decimal. Shortest representation that parses back to
/// the same value, so never less precise than six significant digits.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn role_of(s: &str) -> Result<Role> {
    Ok(match s.trim() {
        "" | "rating" => Role::Rating,
        "reference" => Role::Reference,
        "training" => Role::Training,
        other => bail!("clip role `{other}` is not allowed in a clip list"),
    })
}

/// Clip list: a `url` column, plus optional `condition`, `role` and
/// `reference` columns. Missing conditions come from the config's pattern.
pub fn parse_clip_list(table: &Table, config: &ExperimentConfig) -> Result<Vec<Stimulus>> {
    let url = table
        .column("url")
        .ok_or_else(|| anyhow!("clip list has no `url` column"))?;
    let col = |name| table.column(name);
    let (cond, role, reference) = (col("condition"), col("role"), col("reference"));
    let pattern = config.condition_pattern()?;
    let mut out = Vec::with_capacity(table.len());
    for (i, row) in table.rows.iter().enumerate() {
        let cell = |c: Option<usize>| c.and_then(|c| row.get(c)).map(|s| s.trim()).unwrap_or("");
        let u = cell(Some(url));
        if u.is_empty() {
            bail!("clip list row {}: empty url", i + 1);
        }
        let role = role_of(cell(role)).with_context(|| format!("clip list row {}", i + 1))?;
        let mut s = Stimulus::new(u, role);
        let label = match cell(cond) {
            "" => pattern.as_ref().and_then(|p| p.label(u).name().map(str::to_string)),
            c => Some(c.to_string()),
        };
        if let (Some(l), Role::Rating) = (label, role) {
            s = s.with_condition(l);
        }
        if !cell(reference).is_empty() {
            s = s.with_reference(cell(reference));
        }
        out.push(s);
    }
    Ok(out)
}

pub const RATINGS_HEADER: [&str; 7] = [
    "stimulus_id",
    "condition",
    "worker_id",
    "session_id",
    "value",
    "presentation_order",
    "timestamp",
];

pub fn ratings_table(ratings: &[Rating], conditions: &BTreeMap<String, String>) -> Table {
    let mut t = Table::new(RATINGS_HEADER.iter().map(|s| s.to_string()).collect());
    for r in ratings {
        t.rows.push(vec![
            r.stimulus_id.clone(),
            conditions.get(&r.stimulus_id).cloned().unwrap_or_default(),
            r.worker_id.clone(),
            r.session_id.clone(),
            r.value.to_string(),
            r.presentation_order.map(|o| o.as_str().to_string()).unwrap_or_default(),
            r.timestamp.seconds().to_string(),
        ]);
    }
    t
}

/// Ratings and their stimulus-to-condition map.
pub fn parse_ratings(table: &Table) -> Result<(Vec<Rating>, BTreeMap<String, String>)> {
    let idx: Vec<usize> = ["stimulus_id", "worker_id", "session_id", "value"]
        .iter()
        .map(|c| {
            table
                .column(c)
                .ok_or_else(|| anyhow!("ratings file has no `{c}` column"))
        })
        .collect::<Result<_>>()?;
    let (cond, order, time) = (
        table.column("condition"),
        table.column("presentation_order"),
        table.column("timestamp"),
    );
    let mut ratings = Vec::with_capacity(table.len());
    let mut conditions = BTreeMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        let ctx = || format!("ratings row {}", i + 1);
        let get = |c: usize| row.get(c).map(|s| s.trim()).unwrap_or("");
        let opt = |c: Option<usize>| c.map(get).unwrap_or("");
        let presentation_order = match opt(order) {
            "" => None,
            o => Some(
                o.parse::<PresentationOrder>()
                    .map_err(|e| anyhow!("{e}"))
                    .with_context(ctx)?,
            ),
        };
        let timestamp = match opt(time) {
            "" => Timestamp(0),
            t => Timestamp(t.parse().with_context(ctx)?),
        };
        let r = Rating {
            stimulus_id: get(idx[0]).to_string(),
            worker_id: get(idx[1]).to_string(),
            session_id: get(idx[2]).to_string(),
            value: get(idx[3]).parse().with_context(ctx)?,
            presentation_order,
            timestamp,
        };
        if !opt(cond).is_empty() {
            conditions.insert(r.stimulus_id.clone(), opt(cond).to_string());
        }
        ratings.push(r);
    }
    Ok((ratings, conditions))
}

/// Two-column `condition,score` file, as used for latent qualities and
/// external reference scores.
pub fn parse_scores(table: &Table) -> Result<BTreeMap<String, f64>> {
    let c = table
        .column("condition")
        .ok_or_else(|| anyhow!("scores file has no `condition` column"))?;
    let s = table
        .column("score")
        .or_else(|| table.column("mos"))
        .ok_or_else(|| anyhow!("scores file has no `score` column"))?;
    let mut out = BTreeMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        let key = row.get(c).map(|v| v.trim().to_string()).unwrap_or_default();
        let value: f64 = row
            .get(s)
            .map(|v| v.trim())
            .unwrap_or("")
            .parse()
            .with_context(|| format!("scores row {}", i + 1))?;
        if out.insert(key.clone(), value).is_some() {
            bail!("scores row {}: duplicate condition `{key}`", i + 1);
        }
    }
    Ok(out)
}

const VERDICT_FIXED: [&str; 6] = [
    "assignment_id",
    "worker_id",
    "session_id",
    "accepted",
    "ratings_usable",
    "bonus_due",
];

pub fn verdicts_table(verdicts: &[CleansingVerdict]) -> Table {
    let mut header: Vec<String> = VERDICT_FIXED.iter().map(|s| s.to_string()).collect();
    header.extend(Criterion::ALL.iter().map(|c| c.as_str().to_string()));
    let mut t = Table::new(header);
    for v in verdicts {
        let mut row = vec![
            v.assignment_id.clone(),
            v.worker_id.clone(),
            v.session_id.clone(),
            v.accepted.to_string(),
            v.ratings_usable.to_string(),
            v.bonus_due.to_string(),
        ];
        row.extend(Criterion::ALL.iter().map(|c| v.criteria.get(*c).as_str().to_string()));
        t.rows.push(row);
    }
    t
}

fn flag_of(s: &str) -> Result<Flag> {
    Ok(match s {
        "pass" => Flag::Pass,
        "fail" => Flag::Fail,
        "not_applicable" => Flag::NotApplicable,
        other => bail!("unknown flag `{other}`"),
    })
}

pub fn parse_verdicts(table: &Table) -> Result<Vec<CleansingVerdict>> {
    let col = |c: &str| {
        table
            .column(c)
            .ok_or_else(|| anyhow!("verdicts file has no `{c}` column"))
    };
    let fixed: Vec<usize> = VERDICT_FIXED.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let crit: Vec<(Criterion, usize)> = Criterion::ALL
        .iter()
        .map(|c| Ok((*c, col(c.as_str())?)))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(table.len());
    for (i, row) in table.rows.iter().enumerate() {
        let ctx = || format!("verdicts row {}", i + 1);
        let get = |c: usize| row.get(c).map(|s| s.trim()).unwrap_or("");
        let boolean = |c: usize| get(c).parse::<bool>().with_context(ctx);
        let criteria: CriterionFlags = crit
            .iter()
            .map(|(c, j)| Ok((*c, flag_of(get(*j)).with_context(ctx)?)))
            .collect::<Result<_>>()?;
        out.push(CleansingVerdict {
            assignment_id: get(fixed[0]).to_string(),
            worker_id: get(fixed[1]).to_string(),
            session_id: get(fixed[2]).to_string(),
            accepted: boolean(fixed[3])?,
            ratings_usable: boolean(fixed[4])?,
            bonus_due: boolean(fixed[5])?,
            criteria,
        });
    }
    Ok(out)
}

pub fn read_wav(path: &Path) -> Result<Pcm> {
    let mut r = hound::WavReader::open(path).with_context(|| format!("opening {}", path.display()))?;
    let spec = r.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        bail!("{}: only integer PCM is supported", path.display());
    }
    let samples = r.samples::<i32>().collect::<Result<Vec<_>, _>>()?;
    Ok(Pcm {
        sample_rate: spec.sample_rate,
        bits_per_sample: spec.bits_per_sample,
        channels: spec.channels,
        samples,
    })
}

pub fn write_wav(path: &Path, pcm: &Pcm) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let spec = hound::WavSpec {
        channels: pcm.channels,
        sample_rate: pcm.sample_rate,
        bits_per_sample: pcm.bits_per_sample,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for s in &pcm.samples {
        match pcm.bits_per_sample {
            8 => w.write_sample(*s as i8)?,
            16 => w.write_sample(*s as i16)?,
            _ => w.write_sample(*s)?,
        }
    }
    w.finalize()?;
    Ok(())
}
