//! Costate-grid sweep and the fixed-horizon training set.
//!
//! The sweep walks the inclusive cubic grid `[-p_max, p_max]^3`, propagates
//! each parameter triple, keeps those passing both optimality filters, and
//! records the horizon state/control pair together with its provenance `q`
//! so any record can be replayed and audited later.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extremal::{
    check_disconjugacy, default_colinearity_tolerances, propagate_raw, CostateParams,
    DEFAULT_DISCONJUGACY_TOL,
};

pub const DATASET_HEADER: &str = "X,Y,Theta,U,px,py,c0";

/// Parameters of one sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    /// Grid extent: each costate component runs over `[-p_max, p_max]`.
    pub p_max: f64,
    /// Grid spacing.
    pub step_q: f64,
    /// Propagation horizon; records are taken at this time.
    pub horizon: f64,
    /// Integrator step.
    pub step: f64,
}

impl SweepConfig {
    /// Desk-scale defaults: a sweep that runs in minutes on a laptop.
    pub fn desk_scale() -> Self {
        Self {
            p_max: 10.0,
            step_q: 0.5,
            horizon: 1.5,
            step: crate::extremal::DEFAULT_STEP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_max >= 0.0) || !self.p_max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "p_max must be non-negative, got {}",
                self.p_max
            )));
        }
        if !(self.step_q > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "grid spacing must be positive, got {}",
                self.step_q
            )));
        }
        if self.p_max > 0.0 && self.step_q > 2.0 * self.p_max {
            return Err(Error::InvalidConfig(format!(
                "grid spacing {} exceeds grid width {}",
                self.step_q,
                2.0 * self.p_max
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.step > 0.0 && self.step <= self.horizon) {
            return Err(Error::InvalidConfig(format!(
                "integrator step must satisfy 0 < h <= horizon, got {}",
                self.step
            )));
        }
        Ok(())
    }

    /// Grid values along one axis, inclusive of both endpoints.
    pub fn axis(&self) -> Vec<f64> {
        if self.p_max == 0.0 {
            return vec![0.0];
        }
        let count = (2.0 * self.p_max / self.step_q + 1e-9).floor() as usize + 1;
        (0..count).map(|k| -self.p_max + k as f64 * self.step_q).collect()
    }
}

/// One accepted training record: the horizon state, the control there, and
/// the generating parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetRecord {
    /// `(X, Y, Theta)` at the horizon.
    pub state: [f64; 3],
    /// `U` at the horizon.
    pub control: f64,
    /// Provenance: the grid point that produced this record.
    pub params: CostateParams,
}

/// Sweep outcome counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct SweepStats {
    pub total: usize,
    pub accepted: usize,
    pub rejected_disconjugacy: usize,
    pub rejected_colinear: usize,
    pub diverged: usize,
}

enum Outcome {
    Accepted(DatasetRecord),
    RejectedDisconjugacy,
    RejectedColinear,
    Diverged,
}

fn classify(q: CostateParams, cfg: &SweepConfig) -> Outcome {
    let traj = match propagate_raw(&q, cfg.horizon, cfg.step) {
        Ok(t) => t,
        Err(_) => return Outcome::Diverged,
    };
    // Disconjugacy first: it is the cheap O(n) check.
    if !check_disconjugacy(&traj, 10.0 * traj.step, DEFAULT_DISCONJUGACY_TOL) {
        return Outcome::RejectedDisconjugacy;
    }
    let (tol_angle, tol_chord) = default_colinearity_tolerances(&traj);
    if !crate::extremal::check_colinearity_free(&traj, tol_angle, tol_chord) {
        return Outcome::RejectedColinear;
    }
    let terminal = traj.terminal_state();
    Outcome::Accepted(DatasetRecord {
        state: terminal,
        control: traj.terminal_control(),
        params: q,
    })
}

/// Run the sweep. Records come back in lexicographic grid order
/// `(p_x, p_y, c_0)` regardless of how many worker threads execute it.
pub fn generate_dataset(cfg: &SweepConfig) -> Result<(Vec<DatasetRecord>, SweepStats)> {
    cfg.validate()?;
    let axis = cfg.axis();
    let m = axis.len();
    let total = m * m * m;

    let outcomes: Vec<Outcome> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let i = flat / (m * m);
            let j = (flat / m) % m;
            let k = flat % m;
            classify(CostateParams::new(axis[i], axis[j], axis[k]), cfg)
        })
        .collect();

    let mut stats = SweepStats {
        total,
        ..Default::default()
    };
    let mut records = Vec::new();
    for outcome in outcomes {
        match outcome {
            Outcome::Accepted(rec) => {
                stats.accepted += 1;
                records.push(rec);
            }
            Outcome::RejectedDisconjugacy => stats.rejected_disconjugacy += 1,
            Outcome::RejectedColinear => stats.rejected_colinear += 1,
            Outcome::Diverged => stats.diverged += 1,
        }
    }
    Ok((records, stats))
}

/// Write records as CSV. Values are printed with 17 significant digits so the
/// round trip through text is bit-exact.
pub fn write_dataset(path: impl AsRef<Path>, records: &[DatasetRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{DATASET_HEADER}")?;
    for rec in records {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            rec.state[0],
            rec.state[1],
            rec.state[2],
            rec.control,
            rec.params.p_x,
            rec.params.p_y,
            rec.params.c_0
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut lines = reader.lines().enumerate();

    match lines.next() {
        Some((_, Ok(header))) if header.trim_end() == DATASET_HEADER => {}
        Some((_, Ok(header))) => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header `{DATASET_HEADER}`, found `{header}`"),
            })
        }
        Some((_, Err(e))) => return Err(e.into()),
        None => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "empty file, missing header".into(),
            })
        }
    }

    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 7 fields, found {}", fields.len()),
            });
        }
        let mut values = [0.0f64; 7];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.trim().parse().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("bad float `{field}`: {e}"),
            })?;
        }
        records.push(DatasetRecord {
            state: [values[0], values[1], values[2]],
            control: values[3],
            params: CostateParams::new(values[4], values[5], values[6]),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn degenerate_grid_accepts_only_straight_line() {
        let cfg = SweepConfig {
            p_max: 0.0,
            step_q: 1.0,
            horizon: 1.5,
            step: 1e-3,
        };
        let (records, stats) = generate_dataset(&cfg).unwrap();
        assert_eq!(stats.total, 1);
        assert_eq!(stats.accepted, 1);
        assert_eq!(records.len(), 1);
        let rec = &records[0];
        assert_relative_eq!(rec.state[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(rec.state[1], 1.5, epsilon = 1e-12);
        assert_relative_eq!(rec.state[2], -FRAC_PI_2);
        assert_eq!(rec.control, 0.0);
    }

    #[test]
    fn axis_is_inclusive_of_both_endpoints() {
        let cfg = SweepConfig {
            p_max: 10.0,
            step_q: 0.5,
            horizon: 1.5,
            step: 1e-3,
        };
        let axis = cfg.axis();
        assert_eq!(axis.len(), 41);
        assert_eq!(axis[0], -10.0);
        assert_relative_eq!(*axis.last().unwrap(), 10.0, epsilon = 1e-9);
    }

    #[test]
    fn small_sweep_is_deterministic_and_replayable() {
        let cfg = SweepConfig {
            p_max: 2.0,
            step_q: 1.0,
            horizon: 1.5,
            step: 1e-3,
        };
        let (records, stats) = generate_dataset(&cfg).unwrap();
        assert_eq!(stats.total, 125);
        assert_eq!(
            stats.accepted + stats.rejected_disconjugacy + stats.rejected_colinear + stats.diverged,
            stats.total
        );
        let (records2, stats2) = generate_dataset(&cfg).unwrap();
        assert_eq!(stats, stats2);
        assert_eq!(records, records2);

        // Replay: accepted records reproduce state and control exactly.
        for rec in &records {
            let traj = propagate_raw(&rec.params, cfg.horizon, cfg.step).unwrap();
            let z = traj.terminal_state();
            for d in 0..3 {
                assert!((z[d] - rec.state[d]).abs() <= 1e-10);
            }
            assert!((traj.terminal_control() - rec.control).abs() <= 1e-10);
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let records: Vec<DatasetRecord> = (0..1000)
            .map(|_| DatasetRecord {
                state: [
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-3.2..3.2),
                ],
                control: rng.random_range(-40.0..40.0),
                params: CostateParams::new(
                    rng.random_range(-30.0..30.0),
                    rng.random_range(-30.0..30.0),
                    rng.random_range(-30.0..30.0),
                ),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset(&path, &records).unwrap();
        let loaded = read_dataset(&path).unwrap();
        assert_eq!(records.len(), loaded.len());
        for (a, b) in records.iter().zip(&loaded) {
            assert_eq!(a.state[0].to_bits(), b.state[0].to_bits());
            assert_eq!(a.state[1].to_bits(), b.state[1].to_bits());
            assert_eq!(a.state[2].to_bits(), b.state[2].to_bits());
            assert_eq!(a.control.to_bits(), b.control.to_bits());
            assert_eq!(a.params.p_x.to_bits(), b.params.p_x.to_bits());
        }
    }

    #[test]
    fn empty_dataset_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_dataset(&path, &[]).unwrap();
        let loaded = read_dataset(&path).unwrap();
        assert!(loaded.is_empty());
    }

    #[test]
    fn header_mismatch_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "X,Y,Theta,U\n1,2,3,4\n").unwrap();
        match read_dataset(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad_row.csv");
        std::fs::write(
            &path,
            format!("{DATASET_HEADER}\n0,0,0,0,0,0,0\n0,0,oops,0,0,0,0\n"),
        )
        .unwrap();
        match read_dataset(&path) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("oops"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = SweepConfig::desk_scale();
        cfg.step_q = 0.0;
        assert!(generate_dataset(&cfg).is_err());
        let mut cfg = SweepConfig::desk_scale();
        cfg.step_q = 30.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SweepConfig::desk_scale();
        cfg.step = 10.0;
        assert!(cfg.validate().is_err());
    }
}
