//! Answer batches in, submissions and per-worker histories out.

mod answers;
mod history;

pub use answers::{
    answer_header, parse_answer_batch, submission_record, submissions_to_table, ControlAnswer, EarpodsCheck, EnvTest,
    ParseReport, ParsedBatch, QualificationRecord, RatedItem, RowError, Submission,
};
pub use history::{reconstruct_sessions, Anomaly, WorkerHistory};


#[cfg(test)]
mod tests {
    use super::fixtures::{ccr_submission, submission};
    use super::*;
    use crate::error::IngestError;
    use crate::model::{Method, RatingScale, Timestamp};
    use crate::table::Table;
    use alloc::format;
    use alloc::string::{String, ToString};
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn acr() -> RatingScale {
        RatingScale::for_method(Method::Acr)
    }

    fn batch(n: usize) -> Vec<Submission> {
        (0..n)
            .map(|i| {
                submission(
                    &format!("A{i:03}"),
                    &format!("W{}", i % 7),
                    &format!("s{i}"),
                    1000 + i as u64,
                )
            })
            .collect()
    }

    fn set(table: &mut Table, row: usize, col: &str, value: &str) {
        let c = table.column(col).unwrap();
        table.rows[row][c] = value.to_string();
    }

    #[test]
    fn well_formed_batch() {
        let subs = batch(50);
        let parsed = parse_answer_batch(&submissions_to_table(&subs), &acr()).unwrap();
        assert_eq!(parsed.submissions.len(), 50);
        assert!(parsed.report.errors.is_empty());
        assert_eq!(parsed.submissions, subs);
    }

    #[test]
    fn ccr_round_trip() {
        let subs: Vec<_> = (0..5)
            .map(|i| ccr_submission(&format!("A{i}"), "W", &format!("s{i}"), i))
            .collect();
        let parsed = parse_answer_batch(&submissions_to_table(&subs), &RatingScale::for_method(Method::Ccr)).unwrap();
        assert_eq!(parsed.submissions, subs);
    }

    #[test]
    fn out_of_scale_is_a_row_error() {
        let mut t = submissions_to_table(&batch(5));
        set(&mut t, 2, "rating_4_value", "6");
        let parsed = parse_answer_batch(&t, &acr()).unwrap();
        assert_eq!(parsed.submissions.len(), 4);
        assert_eq!(parsed.report.errors.len(), 1);
        let e = &parsed.report.errors[0];
        assert_eq!(e.row, 3);
        assert_eq!(e.assignment_id.as_deref(), Some("A002"));
        assert!(e.message.contains("rating_4_value"), "{}", e.message);
    }

    #[test]
    fn row_level_errors() {
        let cases = [
            ("rating_1_played", "maybe"),
            ("submit_time", "noon"),
            ("method", "CCR"),
            ("rating_2_order", "ref_first"),
            ("env_answers", "0;x"),
            ("worker_id", ""),
            ("trapping_expected", ""),
        ];
        for (col, v) in cases {
            let mut t = submissions_to_table(&batch(2));
            set(&mut t, 0, col, v);
            let parsed = parse_answer_batch(&t, &acr()).unwrap();
            assert_eq!(parsed.report.errors.len(), 1, "{col}");
            assert_eq!(parsed.submissions.len(), 1);
        }
        let mut t = submissions_to_table(&batch(2));
        t.rows[1].pop();
        assert_eq!(parse_answer_batch(&t, &acr()).unwrap().report.errors.len(), 1);
    }

    #[test]
    fn ccr_answer_needs_order() {
        let subs = [ccr_submission("A", "W", "s", 0)];
        let mut t = submissions_to_table(&subs);
        set(&mut t, 0, "rating_3_order", "");
        let parsed = parse_answer_batch(&t, &RatingScale::for_method(Method::Ccr)).unwrap();
        assert_eq!(parsed.report.errors.len(), 1);
    }

    #[test]
    fn batch_level_errors() {
        let t = submissions_to_table(&batch(1));
        let mut no_worker = t.clone();
        let c = no_worker.column("worker_id").unwrap();
        no_worker.header[c] = "WorkerId".into();
        assert_eq!(
            parse_answer_batch(&no_worker, &acr()),
            Err(IngestError::MissingColumns("worker_id".into()))
        );
        let bare = Table::new(["assignment_id".to_string()].into());
        assert_eq!(parse_answer_batch(&bare, &acr()), Err(IngestError::NoRatingColumns));
    }

    #[test]
    fn optional_sections_absent() {
        let mut s = submission("A", "W", "s", 5);
        s.earpods = None;
        s.env_test = None;
        s.qualification = None;
        s.ratings[3].value = None;
        s.gold.tolerance = None;
        let parsed = parse_answer_batch(&submissions_to_table(&[s.clone()]), &acr()).unwrap();
        assert_eq!(parsed.submissions, [s.clone()]);
        assert!(!parsed.submissions[0].is_complete());
        assert_eq!(s.to_ratings().len(), 11);
    }

    #[test]
    fn history_orders_by_time() {
        let mut subs = Vec::new();
        for (i, t) in [(0, 300), (1, 100), (2, 200)] {
            let mut s = submission(&format!("A{i}"), "W", &format!("s{i}"), t);
            if i != 1 {
                s.qualification = None;
            }
            subs.push(s);
        }
        let h = &reconstruct_sessions(&subs)["W"];
        assert_eq!(h.submissions, ["A1", "A2", "A0"]);
        assert_eq!(h.qualification_index, Some(0));
        assert!(h.qualified());
        assert!(h.anomalies.is_empty());
    }

    #[test]
    fn history_anomalies() {
        let a = submission("A1", "W", "s1", 1);
        let mut b = submission("A2", "W", "s2", 2);
        b.ratings[0].clip = a.ratings[5].clip.clone();
        b.client_fingerprint = "other".into();
        let c = submission("A3", "W", "s1", 3);
        let h = &reconstruct_sessions(&[c, b, a])["W"];
        assert!(h.has_fraud_signal());
        assert!(h.anomalies.contains(&Anomaly::DuplicateQualification {
            assignments: ["A1", "A2", "A3"].map(String::from).into()
        }));
        assert!(h
            .anomalies
            .iter()
            .any(|x| matches!(x, Anomaly::DuplicateSession { session_id, .. } if session_id == "s1")));
        assert_eq!(h.repeated_in("A2").len(), 1);
        // A3 repeats every clip of the earlier session s1
        assert_eq!(h.repeated_in("A3").len(), 12);
        assert!(h
            .anomalies
            .iter()
            .any(|x| matches!(x, Anomaly::MultipleFingerprints { .. })));
    }

    #[test]
    fn certificate_chain_dedups() {
        let mut a = submission("A1", "W", "s1", 1);
        a.certificates = ["q".to_string(), "e1".to_string()].into();
        let mut b = submission("A2", "W", "s2", 2);
        b.qualification = None;
        b.certificates = ["q".to_string(), "e2".to_string()].into();
        let h = &reconstruct_sessions(&[b, a])["W"];
        assert_eq!(h.certificates, ["q", "e1", "e2"]);
        assert!(h.anomalies.is_empty());
        let _ = Timestamp(0);
    }

    proptest! {
        #[test]
        fn rows_are_conserved(corrupt in proptest::collection::vec((0usize..20, 0usize..60, 0u8..4), 0..15)) {
            let mut t = submissions_to_table(&batch(20));
            let width = t.header.len();
            for (row, col, kind) in corrupt {
                let v = match kind {
                    0 => "9",
                    1 => "",
                    2 => "garbage",
                    _ => "1",
                };
                t.rows[row][col % width] = v.to_string();
            }
            let parsed = parse_answer_batch(&t, &acr()).unwrap();
            prop_assert_eq!(parsed.submissions.len() + parsed.report.errors.len(), 20);
            prop_assert_eq!(parsed.report.parsed, parsed.submissions.len());
            prop_assert_eq!(parse_answer_batch(&t, &acr()).unwrap(), parsed);
        }
    }
}
