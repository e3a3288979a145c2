//! Benchmark record CSV files.

use std::io::{Read, Write};

use online_alloc::eval::BenchmarkRecord;

use crate::CliError;

pub const COLUMNS: [&str; 16] = [
    "experiment_id",
    "algorithm",
    "reference_fn",
    "stream",
    "T",
    "m",
    "d",
    "model_seed",
    "trial_seed",
    "eta",
    "total_reward",
    "dual_bound",
    "opt_exact",
    "regret_estimate",
    "stopping_time",
    "runtime_ns",
];

fn csv_err(e: csv::Error) -> CliError {
    if e.is_io_error() {
        CliError::Io(e.to_string())
    } else {
        CliError::Run(e.to_string())
    }
}

pub fn write_records<W: Write>(out: W, records: &[BenchmarkRecord]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<BenchmarkRecord>, CliError> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        return Err(CliError::Config(format!("unexpected CSV header {header:?}")));
    }
    rd.deserialize().map(|r| r.map_err(csv_err)).collect()
}

/// CSV text with the `runtime_ns` column blanked, for reproducibility comparisons.
pub fn without_runtime(records: &[BenchmarkRecord]) -> Result<String, CliError> {
    let stripped: Vec<BenchmarkRecord> = records
        .iter()
        .cloned()
        .map(|mut r| {
            r.runtime_ns = 0;
            r
        })
        .collect();
    let mut buf = Vec::new();
    write_records(&mut buf, &stripped)?;
    String::from_utf8(buf).map_err(|e| CliError::Run(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(opt: Option<f64>) -> BenchmarkRecord {
        BenchmarkRecord {
            experiment_id: "exp".into(),
            algorithm: "mwu".into(),
            reference_fn: "entropy".into(),
            stream: "iid_lp".into(),
            horizon: 250,
            m: 20,
            d: 10,
            model_seed: u64::MAX,
            trial_seed: 12,
            eta: 0.1 / 250f64.sqrt(),
            total_reward: 1234.567891234,
            dual_bound: 1.0 / 3.0,
            opt_exact: opt,
            regret_estimate: -0.0,
            stopping_time: 249,
            runtime_ns: 99,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let recs = vec![record(None), record(Some(2.0f64.sqrt()))];
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&COLUMNS.join(",")));
        // Missing optimum is an empty field.
        assert!(text.lines().nth(1).unwrap().contains(",,"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_records("a,b\n1,2\n".as_bytes()).is_err());
    }
}
