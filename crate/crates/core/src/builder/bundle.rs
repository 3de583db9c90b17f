//! Rendering of the HIT app: markup, client script and embedded config.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::Serialize;

use super::rows::input_header;
use crate::certificate::CertificateKey;
use crate::config::{EnvPair, ExperimentConfig, Sections};
use crate::error::{ConfigError, PlanError};
use crate::model::{Method, RatingScale};

pub const HIT_APP_TEMPLATE: &str = include_str!("../../assets/hit_app.html");
pub const CLIENT_SCRIPT: &str = include_str!("../../assets/p808-client.js");

pub const STORAGE_KEY_QUALIFICATION: &str = "p808.qual";
pub const STORAGE_KEY_ENVIRONMENT: &str = "p808.env";
pub const STORAGE_KEY_FINGERPRINT: &str = "p808.fingerprint";

const PLACEHOLDERS: [&str; 11] = [
    "TITLE",
    "INPUTS",
    "QUALIFICATION",
    "ENVIRONMENT",
    "TRAINING",
    "EARPODS",
    "ENV_PAIRS",
    "METHOD",
    "SCALE",
    "CONFIG_JSON",
    "p808-client.js",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub page: String,
    pub client_script: String,
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            page: HIT_APP_TEMPLATE.to_string(),
            client_script: CLIENT_SCRIPT.to_string(),
        }
    }
}

/// Files of the rendered app, keyed by relative path.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AppBundle {
    pub files: BTreeMap<String, String>,
}

impl AppBundle {
    pub fn page(&self) -> &str {
        self.files.get("index.html").map_or("", String::as_str)
    }
}

#[derive(Serialize)]
struct ClientScale<'a> {
    min: i32,
    max: i32,
    labels: &'a [String],
}

#[derive(Serialize)]
struct ClientEnvironment<'a> {
    pairs: &'a [EnvPair],
    pass_threshold: usize,
    ttl_seconds: u64,
}

#[derive(Serialize)]
struct StorageKeys {
    qualification: &'static str,
    environment: &'static str,
    fingerprint: &'static str,
}

#[derive(Serialize)]
struct ClientConfig<'a> {
    schema_version: u32,
    experiment_id: &'a str,
    method: Method,
    scale: ClientScale<'a>,
    rating_block: usize,
    sections: &'a Sections,
    environment: ClientEnvironment<'a>,
    training: &'a [String],
    training_set_id: &'a str,
    earpods_answer: Option<&'a str>,
    headset_keywords: &'a [String],
    certificate_key: String,
    storage_keys: StorageKeys,
    #[serde(skip_serializing_if = "Option::is_none")]
    build_timestamp: Option<u64>,
}

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn scale_markup(scale: &RatingScale) -> String {
    let mut out = String::new();
    for v in (scale.min..=scale.max).rev() {
        let label = scale.label(v).unwrap_or_default();
        let _ = writeln!(
            out,
            "      <label><input type=\"radio\" value=\"{v}\" required> {v}: {}</label>",
            escape_html(label)
        );
    }
    out
}

fn env_markup(pairs: &[EnvPair]) -> String {
    let mut out = String::new();
    for (i, p) in pairs.iter().enumerate() {
        let _ = writeln!(
            out,
            "    <li data-pair=\"{i}\"><audio controls preload=\"none\" src=\"{}\"></audio> \
             <audio controls preload=\"none\" src=\"{}\"></audio> \
             <label><input type=\"radio\" name=\"env_{i}\" value=\"0\"> first</label> \
             <label><input type=\"radio\" name=\"env_{i}\" value=\"1\"> second</label></li>",
            escape_html(&p.first),
            escape_html(&p.second)
        );
    }
    out
}

fn inputs_markup(method: Method, block: usize) -> String {
    let mut out = String::new();
    for col in input_header(method, block) {
        let _ = writeln!(out, "<input type=\"hidden\" id=\"in-{col}\" value=\"${{{col}}}\">");
    }
    out
}

/// Renders the self-contained app bundle for `config`. `client_key` is the
/// certificate key derived from the experiment secret; `build_timestamp` is
/// embedded only when given.
pub fn render_hit_app(
    config: &ExperimentConfig,
    client_key: &CertificateKey,
    templates: &Templates,
    build_timestamp: Option<u64>,
) -> Result<AppBundle, PlanError> {
    config.validate()?;
    let scale = config.scale();
    scale.validate()?;
    for p in PLACEHOLDERS {
        let needle = if p.ends_with(".js") {
            String::from(p)
        } else {
            format!("{{{{{p}}}}}")
        };
        if !templates.page.contains(&needle) {
            return Err(PlanError::MissingTemplate(format!("index.html: {needle}")));
        }
    }
    if templates.client_script.trim().is_empty() {
        return Err(PlanError::MissingTemplate("p808-client.js".to_string()));
    }

    let env_enabled = config.sections.environment_test;
    let env_pairs: &[EnvPair] = if env_enabled { &config.pools.environment } else { &[] };
    if env_enabled && env_pairs.len() != config.sections.environment_pairs {
        return Err(PlanError::Config(ConfigError::Invalid(format!(
            "environment test needs {} pairs, pool has {}",
            config.sections.environment_pairs,
            env_pairs.len()
        ))));
    }

    let client = ClientConfig {
        schema_version: 1,
        experiment_id: &config.experiment_id,
        method: config.method,
        scale: ClientScale {
            min: scale.min,
            max: scale.max,
            labels: &scale.labels,
        },
        rating_block: config.sections.rating_block,
        sections: &config.sections,
        environment: ClientEnvironment {
            pairs: env_pairs,
            pass_threshold: config.filters.environment_pass_threshold,
            ttl_seconds: config.certificates.environment_ttl_seconds,
        },
        training: &config.pools.training,
        training_set_id: &config.pools.training_set_id,
        earpods_answer: config.pools.earpods_answer.as_deref(),
        headset_keywords: &config.filters.headset_keywords,
        certificate_key: client_key.to_hex(),
        storage_keys: StorageKeys {
            qualification: STORAGE_KEY_QUALIFICATION,
            environment: STORAGE_KEY_ENVIRONMENT,
            fingerprint: STORAGE_KEY_FINGERPRINT,
        },
        build_timestamp,
    };
    let json =
        serde_json::to_string_pretty(&client).map_err(|e| PlanError::Config(ConfigError::Invalid(format!("{e}"))))?;
    let embedded = json.replace("</", "<\\/");

    let flag = |b: bool| if b { "true" } else { "false" };
    let page = templates
        .page
        .replace(
            "{{TITLE}}",
            &escape_html(&format!("{} listening test ({})", config.experiment_id, config.method)),
        )
        .replace(
            "{{INPUTS}}",
            &inputs_markup(config.method, config.sections.rating_block),
        )
        .replace("{{QUALIFICATION}}", flag(config.sections.qualification))
        .replace("{{ENVIRONMENT}}", flag(env_enabled))
        .replace("{{TRAINING}}", flag(config.sections.training))
        .replace("{{EARPODS}}", flag(config.sections.earpods_check))
        .replace("{{ENV_PAIRS}}", &env_markup(env_pairs))
        .replace("{{METHOD}}", config.method.as_str())
        .replace("{{SCALE}}", &scale_markup(&scale))
        .replace("{{CONFIG_JSON}}", &embedded);

    let mut files = BTreeMap::new();
    files.insert("index.html".to_string(), page);
    files.insert("p808-client.js".to_string(), templates.client_script.clone());
    files.insert("config.json".to_string(), json);
    Ok(AppBundle { files })
}

/// Number of `type="radio"` levels in the rating-scale template of a page.
pub fn count_scale_levels(page: &str) -> usize {
    let Some(start) = page.find("<fieldset class=\"p808-scale\"") else {
        return 0;
    };
    let end = page[start..].find("</fieldset>").map_or(page.len(), |e| start + e);
    page[start..end].matches("type=\"radio\"").count()
}

pub fn env_pair_items(page: &str) -> Vec<&str> {
    page.match_indices("<li data-pair=").map(|(i, _)| &page[i..]).collect()
}
