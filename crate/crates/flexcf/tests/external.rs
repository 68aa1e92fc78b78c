use std::time::{Duration, Instant};

use flexcf::external::{ExternalPredictor, DEFAULT_TIMEOUT};
use flexcf_core::dataset::{split, Class, Instance};
use flexcf_core::fixture::FixtureSpec;
use flexcf_core::forest::train_forest;
use flexcf_core::model::Predictor;

const ZEROS: &str = "echo 'FLEXCF-PREDICT 1'; while read -r line; do echo 0; done";

fn rows(n: usize) -> Vec<Instance> {
    (0..n).map(|i| Instance::new(vec![i as f64, 0.5])).collect()
}

#[test]
fn stub_returning_zero_per_line() {
    let p = ExternalPredictor::spawn(ZEROS, DEFAULT_TIMEOUT).unwrap();
    assert_eq!(p.predict_batch(&rows(7)).unwrap(), vec![Class::Desirable; 7]);
    assert_eq!(p.predict(&[1.0, 2.0]).unwrap(), Class::Desirable);
    // batches keep working after the first
    assert_eq!(p.predict_batch(&rows(3)).unwrap().len(), 3);
    assert!(p.predict_batch(&[]).unwrap().is_empty());
}

#[test]
fn malformed_response_is_an_error_not_a_guess() {
    let p = ExternalPredictor::spawn(
        "echo 'FLEXCF-PREDICT 1'; while read -r line; do echo maybe; done",
        DEFAULT_TIMEOUT,
    )
    .unwrap();
    let e = p.predict_batch(&rows(2)).unwrap_err();
    assert!(matches!(e, flexcf_core::Error::Model(ref m) if m.contains("malformed response line `maybe`")), "{e}");
    // the stream is out of step now; later calls fail too
    assert!(p.predict(&[0.0, 0.0]).is_err());
}

#[test]
fn child_exit_is_reported() {
    let p = ExternalPredictor::spawn("echo 'FLEXCF-PREDICT 1'; read -r line; echo 1; exit 0", DEFAULT_TIMEOUT).unwrap();
    let e = p.predict_batch(&rows(3)).unwrap_err();
    assert!(e.to_string().contains("child exited"), "{e}");
}

#[test]
fn timeout_is_enforced() {
    let p = ExternalPredictor::spawn("echo 'FLEXCF-PREDICT 1'; sleep 10", Duration::from_millis(300)).unwrap();
    let start = Instant::now();
    let e = p.predict_batch(&rows(1)).unwrap_err();
    assert!(e.to_string().contains("timed out"), "{e}");
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn handshake_is_required() {
    let e = ExternalPredictor::spawn("echo hello; cat", DEFAULT_TIMEOUT).unwrap_err();
    assert!(e.to_string().contains("handshake"), "{e}");
    let e = ExternalPredictor::spawn("exit 3", DEFAULT_TIMEOUT).unwrap_err();
    assert!(e.to_string().contains("child exited"), "{e}");
}

#[test]
fn served_forest_matches_in_process_forest() {
    let ds = FixtureSpec::planted_mixed(500).generate(11).unwrap();
    let (train, test) = split(&ds, 0.8, 11).unwrap();
    let forest = train_forest(&train, 25, 6, 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    std::fs::write(&model_path, serde_json::to_string(&forest).unwrap()).unwrap();

    let command = format!("'{}' --model '{}'", env!("CARGO_BIN_EXE_flexcf-serve"), model_path.display());
    let external = ExternalPredictor::spawn(&command, DEFAULT_TIMEOUT).unwrap();
    let rows: Vec<Instance> = test.rows().iter().chain(train.rows()).take(100).cloned().collect();
    assert_eq!(rows.len(), 100);
    let expected = forest.predict_batch(&rows).unwrap();
    assert_eq!(external.predict_batch(&rows).unwrap(), expected);
    // one at a time as well
    for (x, want) in rows.iter().zip(&expected).take(10) {
        assert_eq!(external.predict(x).unwrap(), *want);
    }
    assert!(expected.contains(&Class::Desirable) && expected.contains(&Class::Undesirable));
}

#[test]
fn shared_across_threads() {
    let p = ExternalPredictor::spawn(
        "echo 'FLEXCF-PREDICT 1'; while read -r line; do case \"$line\" in '[0'*) echo 0;; *) echo 1;; esac; done",
        DEFAULT_TIMEOUT,
    )
    .unwrap();
    std::thread::scope(|s| {
        for t in 0..4 {
            let p = &p;
            s.spawn(move || {
                for _ in 0..20 {
                    let xs = vec![Instance::new(vec![0.0]), Instance::new(vec![t as f64 + 1.0])];
                    assert_eq!(p.predict_batch(&xs).unwrap(), [Class::Desirable, Class::Undesirable]);
                }
            });
        }
    });
}
