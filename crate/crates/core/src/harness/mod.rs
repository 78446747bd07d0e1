//! Evaluation: ROC/AUC for the detector itself and parser accuracy once
//! flagged inputs are answered with the empty parse.

mod downstream;
mod experiment;
mod report;
mod roc;

pub use downstream::{
    downstream_accuracy, load_outcomes, parse_outcomes, save_outcomes, DownstreamRow, Outcomes,
    ParseOutcome, NO_FILTER, ORACLE,
};
pub use experiment::{
    auc_from_scores, downstream_rows, run_direct_eval, run_downstream_eval, score_encoded,
    DomainData, DomainRun, EncodedRecord, EncodedSplits, ScoreRecord, ScoredSplit, Settings,
};
pub use report::{ResultRecord, ResultTable};
pub use roc::{compute_roc_auc, RocCurve, RocPoint};

pub(crate) use report::to_jsonl;
