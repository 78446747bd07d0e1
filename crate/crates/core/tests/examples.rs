// Every example runs to completion.

#[allow(dead_code)]
#[path = "../examples/evaluation.rs"]
mod evaluation;
#[allow(dead_code)]
#[path = "../examples/file_pipeline.rs"]
mod file_pipeline;
#[allow(dead_code)]
#[path = "../examples/knn_detector.rs"]
mod knn_detector;
#[allow(dead_code)]
#[path = "../examples/roc_auc.rs"]
mod roc_auc;
#[allow(dead_code)]
#[path = "../examples/sentence_encoders.rs"]
mod sentence_encoders;
#[allow(dead_code)]
#[path = "../examples/train_mapping.rs"]
mod train_mapping;
#[allow(dead_code)]
#[path = "../examples/vectors.rs"]
mod vectors;

#[test]
fn vectors_example() {
    vectors::run_example().unwrap();
}

#[test]
fn train_mapping_example() {
    train_mapping::run_example().unwrap();
}

#[test]
fn sentence_encoders_example() {
    sentence_encoders::run_example().unwrap();
}

#[test]
fn knn_detector_example() {
    knn_detector::run_example().unwrap();
}

#[test]
fn roc_auc_example() {
    roc_auc::run_example().unwrap();
}

#[test]
fn evaluation_example() {
    evaluation::run_example().unwrap();
}

#[test]
fn file_pipeline_example() {
    file_pipeline::run_example().unwrap();
}
