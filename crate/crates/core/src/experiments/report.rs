use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::training::EpochRecord;

pub const REPORT_HEADER: &str = "scenario_id,alg,N,L,M,p_or_G,lambda,k_max,U,V,mse,wall_time_s,seed";

/// One (scenario, algorithm) result. Empty CSV fields mean "not applicable".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario_id: String,
    pub alg: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// `p` in i.i.d. mode, `G` in grouped mode.
    pub p_or_g: f64,
    /// Multiplier of each sample's zero-solution threshold for the GROUP LASSO
    /// solvers, the absolute λ inside the unrolled layers for LEARNED.
    pub lambda: Option<f64>,
    pub k_max: Option<usize>,
    #[serde(rename = "U")]
    pub u: Option<usize>,
    #[serde(rename = "V")]
    pub v: Option<usize>,
    pub mse: f64,
    pub wall_time_s: f64,
    pub seed: u64,
}

pub fn write_report<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(REPORT_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != REPORT_HEADER {
        return Err(crate::error::Error::Parse {
            line: 1,
            reason: format!("unexpected report header {:?}", header.join(",")),
        });
    }
    let rows = r
        .records()
        .map(|rec| {
            let rec = rec?;
            let row: ReportRow = rec.deserialize(None)?;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows)
}

pub fn save_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    write_report(std::fs::File::create(path)?, rows)
}

pub fn load_report(path: &Path) -> Result<Vec<ReportRow>> {
    read_report(std::fs::File::open(path)?)
}

/// Report file that is flushed after every row, so a failed run keeps the
/// rows finished before the failure.
pub struct ReportWriter {
    inner: csv::Writer<std::fs::File>,
}

impl ReportWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        inner.write_record(REPORT_HEADER.split(','))?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn push(&mut self, row: &ReportRow) -> Result<()> {
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Point of a convergence curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub k: usize,
    pub alg: String,
    pub mse: f64,
}

pub fn save_curves(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_training_curve(path: &Path, rows: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row() -> ReportRow {
        ReportRow {
            scenario_id: "iid_N100_L15_M4_p0.1".into(),
            alg: "BCD".into(),
            n: 100,
            l: 15,
            m: 4,
            p_or_g: 0.1,
            lambda: Some(0.05),
            k_max: Some(200),
            u: None,
            v: None,
            mse: 0.0123,
            wall_time_s: 1.25,
            seed: 7,
        }
    }

    #[test]
    fn header_is_exact() {
        let mut buf = Vec::new();
        write_report(&mut buf, &[row()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), REPORT_HEADER);
        assert_eq!(lines.next().unwrap(), "iid_N100_L15_M4_p0.1,BCD,100,15,4,0.1,0.05,200,,,0.0123,1.25,7");
    }

    #[test]
    fn empty_report_has_header_only() {
        let mut buf = Vec::new();
        write_report(&mut buf, &[]).unwrap();
        assert_eq!(read_report(buf.as_slice()).unwrap(), vec![]);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_report("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn training_curve_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let rec = EpochRecord {
            epoch: 1,
            train_loss: 0.5,
            eval_mse: None,
            wall_time_s: 2.0,
        };
        save_training_curve(&path, &[rec]).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, "epoch,train_loss,eval_mse,wall_time_s\n1,0.5,,2.0\n");
    }

    #[test]
    fn incremental_writer_matches_batch_writer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let mut w = ReportWriter::create(&path).unwrap();
        assert_eq!(load_report(&path).unwrap(), vec![]);
        w.push(&row()).unwrap();
        let mut buf = Vec::new();
        write_report(&mut buf, &[row()]).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), buf);
    }

    proptest! {
        #[test]
        fn rows_round_trip(
            id in "[a-z0-9_.,\" ]{1,20}",
            alg in "[A-Z_]{1,14}",
            n in 1usize..10_000,
            l in 1usize..10_000,
            m in 1usize..64,
            pg in 0.0f64..100.0,
            lambda in proptest::option::of(0.0f64..1e3),
            k in proptest::option::of(0usize..100_000),
            u in proptest::option::of(0usize..500),
            v in proptest::option::of(0usize..10),
            mse in 0.0f64..1e6,
            t in 0.0f64..1e4,
            seed in any::<u64>(),
        ) {
            let rows = vec![ReportRow { scenario_id: id, alg, n, l, m, p_or_g: pg, lambda, k_max: k, u, v, mse, wall_time_s: t, seed }, row()];
            let mut buf = Vec::new();
            write_report(&mut buf, &rows).unwrap();
            prop_assert_eq!(read_report(buf.as_slice()).unwrap(), rows);
        }
    }
}
