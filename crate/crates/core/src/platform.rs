//! Platform actions derived from cleansing verdicts, and their idempotent
//! execution through a pluggable transport.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cleansing::{CleansingVerdict, Criterion, Flag};
use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Approve,
    Reject,
    Bonus,
    Notify,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Approve => "approve",
            ActionKind::Reject => "reject",
            ActionKind::Bonus => "bonus",
            ActionKind::Notify => "notify",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatformAction {
    pub kind: ActionKind,
    /// Absent for worker-level actions (notify).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment_id: Option<String>,
    pub worker_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount_minor_units: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currency: Option<String>,
    pub message: String,
    pub idempotency_key: String,
}

impl PlatformAction {
    fn new(
        experiment_id: &str,
        kind: ActionKind,
        assignment_id: Option<&str>,
        worker_id: &str,
        amount: Option<(u64, &str)>,
        message: String,
    ) -> PlatformAction {
        let mut h = Sha256::new();
        let amount_text = amount.map(|(a, c)| format!("{a} {c}")).unwrap_or_default();
        for part in [
            "p808/action/v1",
            experiment_id,
            kind.as_str(),
            assignment_id.unwrap_or(""),
            worker_id,
            &amount_text,
        ] {
            h.update(part.as_bytes());
            h.update([0x1f]);
        }
        PlatformAction {
            kind,
            assignment_id: assignment_id.map(ToString::to_string),
            worker_id: worker_id.to_string(),
            amount_minor_units: amount.map(|(a, _)| a),
            currency: amount.map(|(_, c)| c.to_string()),
            message,
            idempotency_key: hex::encode(h.finalize()),
        }
    }

    /// The assignment, or the worker for worker-level actions.
    pub fn target(&self) -> &str {
        self.assignment_id.as_deref().unwrap_or(&self.worker_id)
    }

    /// Rejections carry a reason; bonuses a positive amount.
    pub fn validate(&self) -> Result<(), String> {
        match self.kind {
            ActionKind::Reject if self.message.trim().is_empty() => Err("reject without a reason".into()),
            ActionKind::Bonus if self.amount_minor_units.unwrap_or(0) == 0 => Err("bonus without an amount".into()),
            ActionKind::Approve | ActionKind::Reject | ActionKind::Bonus if self.assignment_id.is_none() => {
                Err(format!("{} without an assignment", self.kind))
            }
            _ => Ok(()),
        }
    }
}

/// Approve or reject every verdict, then a bonus where one is due; workers
/// who failed qualification are notified at the end when configured.
/// Verdicts are processed in assignment order.
pub fn plan_actions(verdicts: &[CleansingVerdict], config: &ExperimentConfig) -> Vec<PlatformAction> {
    let pay = &config.payment;
    let exp = config.experiment_id.as_str();
    let mut sorted: Vec<&CleansingVerdict> = verdicts.iter().collect();
    sorted.sort_by(|a, b| a.assignment_id.cmp(&b.assignment_id));

    let mut out = Vec::new();
    let mut disqualified = BTreeSet::new();
    for v in sorted {
        let a = Some(v.assignment_id.as_str());
        if v.accepted {
            out.push(PlatformAction::new(
                exp,
                ActionKind::Approve,
                a,
                &v.worker_id,
                None,
                String::new(),
            ));
        } else {
            let reasons: Vec<&str> = v.rejection_reasons(config).iter().map(|c| c.as_str()).collect();
            let message = if reasons.is_empty() {
                pay.reject_message.clone()
            } else {
                format!("{} (failed: {})", pay.reject_message, reasons.join(", "))
            };
            out.push(PlatformAction::new(
                exp,
                ActionKind::Reject,
                a,
                &v.worker_id,
                None,
                message,
            ));
        }
        if v.bonus_due && pay.bonus_minor_units > 0 {
            out.push(PlatformAction::new(
                exp,
                ActionKind::Bonus,
                a,
                &v.worker_id,
                Some((pay.bonus_minor_units, &pay.currency)),
                pay.bonus_message.clone(),
            ));
        }
        if v.criteria.get(Criterion::Qualification) == Flag::Fail {
            disqualified.insert(v.worker_id.as_str());
        }
    }
    if pay.notify_disqualified {
        for w in disqualified {
            out.push(PlatformAction::new(
                exp,
                ActionKind::Notify,
                None,
                w,
                None,
                pay.notify_message.clone(),
            ));
        }
    }
    out
}

/// The platform side. Implementations perform one action per call.
pub trait Transport {
    fn perform(&mut self, action: &PlatformAction) -> Result<(), String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerStatus {
    Ok,
    Failed,
}

/// One line of the idempotency ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub idempotency_key: String,
    pub kind: ActionKind,
    pub target: String,
    pub status: LedgerStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Append-only record of executed actions.
pub trait Ledger {
    /// Whether an action with this key already succeeded.
    fn completed(&self, key: &str) -> bool;
    fn append(&mut self, entry: LedgerEntry) -> Result<(), String>;
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemoryLedger {
    pub entries: Vec<LedgerEntry>,
}

impl Ledger for MemoryLedger {
    fn completed(&self, key: &str) -> bool {
        self.entries
            .iter()
            .any(|e| e.idempotency_key == key && e.status == LedgerStatus::Ok)
    }

    fn append(&mut self, entry: LedgerEntry) -> Result<(), String> {
        self.entries.push(entry);
        Ok(())
    }
}

/// Transport that records calls and fails the actions whose keys are in
/// `fail_keys`.
#[derive(Debug, Clone, Default)]
pub struct RecordingTransport {
    pub calls: Vec<PlatformAction>,
    pub fail_keys: BTreeSet<String>,
}

impl Transport for RecordingTransport {
    fn perform(&mut self, action: &PlatformAction) -> Result<(), String> {
        self.calls.push(action.clone());
        if self.fail_keys.contains(&action.idempotency_key) {
            Err(format!("injected failure for {}", action.target()))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "error", rename_all = "snake_case")]
pub enum ActionStatus {
    Planned,
    Ok,
    Failed(String),
    /// Already completed in an earlier run.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionEntry {
    pub idempotency_key: String,
    pub kind: ActionKind,
    pub target: String,
    #[serde(flatten)]
    pub status: ActionStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub dry_run: bool,
    pub entries: Vec<ExecutionEntry>,
}

impl ExecutionReport {
    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            let k = match e.status {
                ActionStatus::Planned => "planned",
                ActionStatus::Ok => "ok",
                ActionStatus::Failed(_) => "failed",
                ActionStatus::Skipped => "skipped",
            };
            *m.entry(k).or_insert(0) += 1;
        }
        m
    }

    pub fn count(&self, status: &str) -> usize {
        self.counts().get(status).copied().unwrap_or(0)
    }
}

/// Runs the actions in order. A dry run touches neither the transport nor
/// the ledger. Transport failures are recorded and the run continues; a
/// ledger write failure aborts, since the ledger is what prevents repeats.
pub fn execute<T: Transport + ?Sized, L: Ledger + ?Sized>(
    actions: &[PlatformAction],
    transport: &mut T,
    ledger: &mut L,
    dry_run: bool,
) -> Result<ExecutionReport, String> {
    let mut report = ExecutionReport {
        dry_run,
        entries: Vec::with_capacity(actions.len()),
    };
    for a in actions {
        let status = if dry_run {
            ActionStatus::Planned
        } else if ledger.completed(&a.idempotency_key) {
            ActionStatus::Skipped
        } else {
            let result = a.validate().and_then(|_| transport.perform(a));
            let (ledger_status, error) = match &result {
                Ok(()) => (LedgerStatus::Ok, None),
                Err(e) => (LedgerStatus::Failed, Some(e.clone())),
            };
            ledger.append(LedgerEntry {
                idempotency_key: a.idempotency_key.clone(),
                kind: a.kind,
                target: a.target().to_string(),
                status: ledger_status,
                error,
            })?;
            match result {
                Ok(()) => ActionStatus::Ok,
                Err(e) => ActionStatus::Failed(e),
            }
        };
        report.entries.push(ExecutionEntry {
            idempotency_key: a.idempotency_key.clone(),
            kind: a.kind,
            target: a.target().to_string(),
            status,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cleansing::CriterionFlags;
    use crate::config::SecretRef;
    use crate::model::Method;

    fn verdict(i: usize, accepted: bool, bonus: bool) -> CleansingVerdict {
        let mut criteria = CriterionFlags::default();
        for c in Criterion::ALL {
            criteria.set(c, Flag::Pass);
        }
        if !accepted {
            criteria.set(Criterion::Trapping, Flag::Fail);
            criteria.set(Criterion::Qualification, Flag::Fail);
        }
        CleansingVerdict {
            assignment_id: format!("A{i:02}"),
            worker_id: format!("W{}", i % 5),
            session_id: format!("s{i}"),
            accepted,
            ratings_usable: accepted,
            criteria,
            bonus_due: bonus,
        }
    }

    fn config() -> ExperimentConfig {
        let mut c = ExperimentConfig::new("exp", Method::Acr, SecretRef::Inline("s".into()));
        c.payment.bonus_minor_units = 25;
        c
    }

    /// 10 accepted (6 with a bonus due) and 2 rejected.
    fn verdicts() -> Vec<CleansingVerdict> {
        let mut v: Vec<_> = (0..10).map(|i| verdict(i, true, i < 6)).collect();
        v.push(verdict(10, false, false));
        v.push(verdict(11, false, false));
        v.reverse();
        v
    }

    #[test]
    fn action_counts_and_order() {
        let actions = plan_actions(&verdicts(), &config());
        assert_eq!(actions.len(), 18);
        assert_eq!(actions.iter().filter(|a| a.kind == ActionKind::Approve).count(), 10);
        assert_eq!(actions.iter().filter(|a| a.kind == ActionKind::Reject).count(), 2);
        assert_eq!(actions.iter().filter(|a| a.kind == ActionKind::Bonus).count(), 6);
        assert_eq!(actions[0].target(), "A00");
        assert_eq!(actions[1].kind, ActionKind::Bonus);
        assert!(actions.iter().all(|a| a.validate().is_ok()));
        let keys: BTreeSet<&str> = actions.iter().map(|a| a.idempotency_key.as_str()).collect();
        assert_eq!(keys.len(), 18);
    }

    #[test]
    fn reject_carries_reasons() {
        let actions = plan_actions(&verdicts(), &config());
        let r = actions.iter().find(|a| a.kind == ActionKind::Reject).unwrap();
        assert!(r.message.ends_with("(failed: trapping)"), "{}", r.message);
    }

    #[test]
    fn keys_are_stable() {
        let a = plan_actions(&verdicts(), &config());
        let mut shuffled = verdicts();
        shuffled.rotate_left(5);
        assert_eq!(a, plan_actions(&shuffled, &config()));
        let mut other = config();
        other.experiment_id = "exp2".into();
        assert_ne!(
            a[0].idempotency_key,
            plan_actions(&verdicts(), &other)[0].idempotency_key
        );
    }

    #[test]
    fn zero_bonus_and_notify() {
        let mut cfg = config();
        cfg.payment.bonus_minor_units = 0;
        cfg.payment.notify_disqualified = true;
        let actions = plan_actions(&verdicts(), &cfg);
        assert_eq!(actions.len(), 12 + 2);
        assert!(actions[12..]
            .iter()
            .all(|a| a.kind == ActionKind::Notify && a.assignment_id.is_none()));
    }

    #[test]
    fn dry_run_makes_no_calls() {
        let actions = plan_actions(&verdicts(), &config());
        let mut t = RecordingTransport::default();
        let mut l = MemoryLedger::default();
        let r = execute(&actions, &mut t, &mut l, true).unwrap();
        assert_eq!(r.count("planned"), 18);
        assert!(t.calls.is_empty() && l.entries.is_empty());
    }

    #[test]
    fn failure_then_retry_only_failed() {
        let actions = plan_actions(&verdicts(), &config());
        let mut t = RecordingTransport::default();
        t.fail_keys.insert(actions[2].idempotency_key.clone());
        let mut l = MemoryLedger::default();
        let r = execute(&actions, &mut t, &mut l, false).unwrap();
        assert_eq!((r.count("ok"), r.count("failed")), (17, 1));
        assert!(matches!(r.entries[2].status, ActionStatus::Failed(_)));

        let mut t2 = RecordingTransport::default();
        let r2 = execute(&actions, &mut t2, &mut l, false).unwrap();
        assert_eq!(t2.calls.len(), 1);
        assert_eq!(t2.calls[0], actions[2]);
        assert_eq!((r2.count("ok"), r2.count("skipped")), (1, 17));

        let mut t3 = RecordingTransport::default();
        execute(&actions, &mut t3, &mut l, false).unwrap();
        assert!(t3.calls.is_empty());
    }

    #[test]
    fn invalid_action_is_not_sent() {
        let mut actions = plan_actions(&verdicts(), &config());
        let bonus = actions.iter_mut().find(|a| a.kind == ActionKind::Bonus).unwrap();
        bonus.amount_minor_units = Some(0);
        let mut t = RecordingTransport::default();
        let r = execute(&actions, &mut t, &mut MemoryLedger::default(), false).unwrap();
        assert_eq!(r.count("failed"), 1);
        assert_eq!(t.calls.len(), 17);
    }
}
