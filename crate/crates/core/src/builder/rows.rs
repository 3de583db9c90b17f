//! Platform input rows: one row per session, read by the HIT app through the
//! platform's template variables.
//!
//! Columns (i = 1..=block, slots are 0-based positions in the presented
//! sequence):
//!
//! | column | methods |
//! |---|---|
//! | `session_id`, `training_set` | all |
//! | `rating_{i}_ref_url` | DCR, CCR |
//! | `rating_{i}_url` | all |
//! | `rating_{i}_order` | CCR |
//! | `trapping_ref_url`, `gold_ref_url` | DCR, CCR |
//! | `trapping_url`, `trapping_answer`, `trapping_slot` | all |
//! | `trapping_order`, `gold_order` | CCR |
//! | `gold_url`, `gold_answer`, `gold_tolerance`, `gold_slot` | all |

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::plan::{Question, TestPlan};
use crate::error::PlanError;
use crate::model::{Method, PresentationOrder};
use crate::table::{RowView, Table};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowItem {
    pub url: String,
    pub ref_url: Option<String>,
    pub order: Option<PresentationOrder>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowControl {
    pub item: RowItem,
    pub answer: i32,
    pub tolerance: Option<u32>,
    pub slot: usize,
}

/// Typed view of one input row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRow {
    pub session_id: String,
    pub training_set: String,
    pub rating: Vec<RowItem>,
    pub trapping: RowControl,
    pub gold: RowControl,
}

fn item(q: &Question, method: Method) -> RowItem {
    RowItem {
        url: q.stimulus.url.clone(),
        ref_url: if method.is_paired() { q.reference.clone() } else { None },
        order: if method == Method::Ccr { q.order } else { None },
    }
}

impl TestPlan {
    pub fn session_rows(&self) -> Vec<SessionRow> {
        let method = self.method();
        self.sessions
            .iter()
            .map(|s| SessionRow {
                session_id: s.session_id.clone(),
                training_set: s.training_ref.clone(),
                rating: s.rating.iter().map(|q| item(q, method)).collect(),
                trapping: RowControl {
                    item: item(&s.trapping, method),
                    answer: s.trapping.expected_answer.unwrap_or_default(),
                    tolerance: None,
                    slot: s.trapping_slot,
                },
                gold: RowControl {
                    item: item(&s.gold, method),
                    answer: s.gold.expected_answer.unwrap_or_default(),
                    tolerance: s.gold.tolerance,
                    slot: s.gold_slot,
                },
            })
            .collect()
    }
}

pub fn input_header(method: Method, block: usize) -> Vec<String> {
    let mut h: Vec<String> = ["session_id", "training_set"].iter().map(|s| s.to_string()).collect();
    for i in 1..=block {
        if method.is_paired() {
            h.push(format!("rating_{i}_ref_url"));
        }
        h.push(format!("rating_{i}_url"));
        if method == Method::Ccr {
            h.push(format!("rating_{i}_order"));
        }
    }
    for ctl in ["trapping", "gold"] {
        if method.is_paired() {
            h.push(format!("{ctl}_ref_url"));
        }
        h.push(format!("{ctl}_url"));
        if method == Method::Ccr {
            h.push(format!("{ctl}_order"));
        }
        h.push(format!("{ctl}_answer"));
        if ctl == "gold" {
            h.push("gold_tolerance".to_string());
        }
        h.push(format!("{ctl}_slot"));
    }
    h
}

fn push_item(row: &mut Vec<String>, it: &RowItem, method: Method) {
    if method.is_paired() {
        row.push(it.ref_url.clone().unwrap_or_default());
    }
    row.push(it.url.clone());
    if method == Method::Ccr {
        row.push(it.order.map(|o| o.as_str().to_string()).unwrap_or_default());
    }
}

/// Renders the plan as the platform input table.
pub fn emit_input_rows(plan: &TestPlan) -> Table {
    let method = plan.method();
    let mut table = Table::new(input_header(method, plan.block_size()));
    for s in plan.session_rows() {
        let mut row = Vec::with_capacity(table.header.len());
        row.push(s.session_id.clone());
        row.push(s.training_set.clone());
        for it in &s.rating {
            push_item(&mut row, it, method);
        }
        for (ctl, is_gold) in [(&s.trapping, false), (&s.gold, true)] {
            push_item(&mut row, &ctl.item, method);
            row.push(ctl.answer.to_string());
            if is_gold {
                row.push(ctl.tolerance.map(|t| t.to_string()).unwrap_or_default());
            }
            row.push(ctl.slot.to_string());
        }
        table.rows.push(row);
    }
    table
}

fn need<'a>(row: &RowView<'a>, name: &str, line: usize) -> Result<&'a str, PlanError> {
    row.get(name)
        .ok_or_else(|| PlanError::InputRows(format!("row {line}: missing column `{name}`")))
}

fn num<T: core::str::FromStr>(row: &RowView<'_>, name: &str, line: usize) -> Result<T, PlanError> {
    need(row, name, line)?
        .parse()
        .map_err(|_| PlanError::InputRows(format!("row {line}: bad number in `{name}`")))
}

fn read_item(row: &RowView<'_>, prefix: &str, method: Method, line: usize) -> Result<RowItem, PlanError> {
    let ref_url = if method.is_paired() {
        Some(need(row, &format!("{prefix}_ref_url"), line)?.to_string())
    } else {
        None
    };
    let order = if method == Method::Ccr {
        Some(
            need(row, &format!("{prefix}_order"), line)?
                .parse()
                .map_err(|_| PlanError::InputRows(format!("row {line}: bad `{prefix}_order`")))?,
        )
    } else {
        None
    };
    Ok(RowItem {
        url: need(row, &format!("{prefix}_url"), line)?.to_string(),
        ref_url,
        order,
    })
}

/// Parses an input table back into typed rows.
pub fn parse_input_rows(table: &Table, method: Method) -> Result<Vec<SessionRow>, PlanError> {
    let block = (1..)
        .take_while(|i| table.column(&format!("rating_{i}_url")).is_some())
        .count();
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, cells) in table.rows.iter().enumerate() {
        let line = line + 1;
        let row = RowView {
            header: &table.header,
            cells,
        };
        let rating = (1..=block)
            .map(|i| read_item(&row, &format!("rating_{i}"), method, line))
            .collect::<Result<Vec<_>, _>>()?;
        let tolerance = match need(&row, "gold_tolerance", line)? {
            "" => None,
            t => Some(
                t.parse()
                    .map_err(|_| PlanError::InputRows(format!("row {line}: bad `gold_tolerance`")))?,
            ),
        };
        out.push(SessionRow {
            session_id: need(&row, "session_id", line)?.to_string(),
            training_set: need(&row, "training_set", line)?.to_string(),
            rating,
            trapping: RowControl {
                item: read_item(&row, "trapping", method, line)?,
                answer: num(&row, "trapping_answer", line)?,
                tolerance: None,
                slot: num(&row, "trapping_slot", line)?,
            },
            gold: RowControl {
                item: read_item(&row, "gold", method, line)?,
                answer: num(&row, "gold_answer", line)?,
                tolerance,
                slot: num(&row, "gold_slot", line)?,
            },
        });
    }
    Ok(out)
}
