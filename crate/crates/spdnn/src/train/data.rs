//! Training datasets and their CSV formats.
//!
//! Direct data: `case,step,gp,eps...,sig...` rows, one per Gauss point and
//! time snapshot, grouped into time-ordered sequences.
//!
//! Indirect data per case: a mesh file plus `step,node,ux[,uy]` displacement
//! rows and `step,dof,f` external force rows.

use crate::linalg::Voigt;
use crate::model::ScalingSpec;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// One time-ordered strain/stress sequence at a single material point.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectSequence {
    pub case: String,
    pub gp: usize,
    pub eps: Vec<Voigt>,
    pub sig: Vec<Voigt>,
}

#[derive(Clone, Debug, Default)]
pub struct DirectDataset {
    pub dim: usize,
    pub sequences: Vec<DirectSequence>,
}

impl DirectDataset {
    pub fn new(dim: usize) -> Self {
        DirectDataset { dim, sequences: Vec::new() }
    }

    /// Total number of one-step transitions (the training tuples).
    pub fn n_tuples(&self) -> usize {
        self.sequences.iter().map(|s| s.eps.len().saturating_sub(1)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.sequences {
            if s.eps.len() != s.sig.len() {
                return Err(Error::Data(format!(
                    "sequence {}/gp{} has mismatched strain/stress lengths",
                    s.case, s.gp
                )));
            }
            if s.eps.len() < 2 {
                return Err(Error::Data(format!(
                    "sequence {}/gp{} has fewer than 2 snapshots",
                    s.case, s.gp
                )));
            }
            if s.eps.iter().chain(&s.sig).any(|v| v.dim() != self.dim) {
                return Err(Error::Data("sequence dimension mismatch".into()));
            }
        }
        Ok(())
    }

    /// Largest |σ| component in the data, used for scaling and reports.
    pub fn max_abs_stress(&self) -> f64 {
        self.sequences
            .iter()
            .flat_map(|s| s.sig.iter())
            .flat_map(|v| v.as_slice().iter().copied())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_strain(&self) -> f64 {
        self.sequences
            .iter()
            .flat_map(|s| s.eps.iter())
            .flat_map(|v| v.as_slice().iter().copied())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        match self.dim {
            1 => s.push_str("case,step,gp,eps,sig\n"),
            3 => s.push_str("case,step,gp,eps_xx,eps_yy,eps_xy,sig_xx,sig_yy,sig_xy\n"),
            _ => return Err(Error::Data("unsupported dimension".into())),
        }
        for seq in &self.sequences {
            for (i, (e, g)) in seq.eps.iter().zip(&seq.sig).enumerate() {
                let _ = write!(s, "{},{},{}", seq.case, i, seq.gp);
                for v in e.as_slice().iter().chain(g.as_slice()) {
                    let _ = write!(s, ",{v}");
                }
                s.push('\n');
            }
        }
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Data("empty dataset file".into()))?;
        let dim = match header.matches("eps").count() {
            1 => 1,
            3 => 3,
            _ => return Err(Error::Data(format!("unrecognized dataset header `{header}`"))),
        };
        let mut out = DirectDataset::new(dim);
        let mut current: Option<DirectSequence> = None;
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 + 2 * dim {
                return Err(Error::Data(format!("bad field count on line {}", lineno + 2)));
            }
            let case = fields[0].to_string();
            let gp: usize = fields[2]
                .parse()
                .map_err(|_| Error::Data(format!("bad gp on line {}", lineno + 2)))?;
            let nums: Vec<f64> = fields[3..]
                .iter()
                .map(|f| f.parse().map_err(|_| Error::Data(format!("bad number on line {}", lineno + 2))))
                .collect::<Result<_>>()?;
            let eps = Voigt::from_slice(&nums[..dim]);
            let sig = Voigt::from_slice(&nums[dim..]);
            let start_new = match &current {
                Some(c) => c.case != case || c.gp != gp,
                None => true,
            };
            if start_new {
                if let Some(c) = current.take() {
                    out.sequences.push(c);
                }
                current = Some(DirectSequence { case, gp, eps: vec![], sig: vec![] });
            }
            let c = current.as_mut().unwrap();
            c.eps.push(eps);
            c.sig.push(sig);
        }
        if let Some(c) = current.take() {
            out.sequences.push(c);
        }
        out.validate()?;
        Ok(out)
    }
}

/// Divides strains by `ε_ref` and stresses by `σ_ref`.
pub fn scale_dataset(data: &DirectDataset, scaling: &ScalingSpec) -> Result<DirectDataset> {
    scaling.validate()?;
    let mut out = data.clone();
    for s in &mut out.sequences {
        for e in &mut s.eps {
            *e = e.scale(1.0 / scaling.eps_ref);
        }
        for g in &mut s.sig {
            *g = g.scale(1.0 / scaling.sig_ref);
        }
    }
    Ok(out)
}

/// Inverse of [`scale_dataset`].
pub fn unscale_dataset(data: &DirectDataset, scaling: &ScalingSpec) -> Result<DirectDataset> {
    scaling.validate()?;
    scale_dataset(data, &ScalingSpec { eps_ref: 1.0 / scaling.eps_ref, sig_ref: 1.0 / scaling.sig_ref })
}

/// One loading case of full-field observations: displacements and external
/// forces per time snapshot (snapshot 0 is the rest state).
#[derive(Clone, Debug, PartialEq)]
pub struct IndirectCase {
    pub case: String,
    /// `[snapshot][dof]` nodal displacements.
    pub disp: Vec<Vec<f64>>,
    /// `[snapshot][dof]` external force vectors.
    pub force: Vec<Vec<f64>>,
}

impl IndirectCase {
    pub fn validate(&self, ndof: usize) -> Result<()> {
        if self.disp.len() != self.force.len() || self.disp.len() < 4 {
            return Err(Error::Data(format!(
                "case {} needs at least 4 matching snapshots",
                self.case
            )));
        }
        if self.disp.iter().chain(&self.force).any(|v| v.len() != ndof) {
            return Err(Error::Data(format!("case {} has wrong vector lengths", self.case)));
        }
        if self.disp[0].iter().any(|&v| v != 0.0) {
            return Err(Error::Data(format!("case {} must start from rest", self.case)));
        }
        Ok(())
    }

    pub fn write_csv(&self, dir: &Path, ndim: usize) -> Result<()> {
        let mut du = String::from(if ndim == 1 { "step,node,ux\n" } else { "step,node,ux,uy\n" });
        for (s, u) in self.disp.iter().enumerate() {
            for n in 0..u.len() / ndim {
                let _ = write!(du, "{s},{n}");
                for d in 0..ndim {
                    let _ = write!(du, ",{}", u[n * ndim + d]);
                }
                du.push('\n');
            }
        }
        std::fs::write(dir.join(format!("{}_u.csv", self.case)), du)?;
        let mut df = String::from("step,dof,f\n");
        for (s, f) in self.force.iter().enumerate() {
            for (d, v) in f.iter().enumerate() {
                let _ = writeln!(df, "{s},{d},{v}");
            }
        }
        std::fs::write(dir.join(format!("{}_f.csv", self.case)), df)?;
        Ok(())
    }

    pub fn read_csv(dir: &Path, case: &str, ndof: usize, ndim: usize) -> Result<Self> {
        let u_text = std::fs::read_to_string(dir.join(format!("{case}_u.csv")))?;
        let f_text = std::fs::read_to_string(dir.join(format!("{case}_f.csv")))?;
        let mut disp: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in u_text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 2 + ndim {
                return Err(Error::Data(format!("bad displacement row {}", lineno + 1)));
            }
            let s: usize = fields[0].parse().map_err(|_| Error::Data("bad step".into()))?;
            let n: usize = fields[1].parse().map_err(|_| Error::Data("bad node".into()))?;
            while disp.len() <= s {
                disp.push(vec![0.0; ndof]);
            }
            for d in 0..ndim {
                disp[s][n * ndim + d] = fields[2 + d]
                    .parse()
                    .map_err(|_| Error::Data("bad displacement value".into()))?;
            }
        }
        let mut force: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in f_text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Data(format!("bad force row {}", lineno + 1)));
            }
            let s: usize = fields[0].parse().map_err(|_| Error::Data("bad step".into()))?;
            let d: usize = fields[1].parse().map_err(|_| Error::Data("bad dof".into()))?;
            while force.len() <= s {
                force.push(vec![0.0; ndof]);
            }
            force[s][d] = fields[2].parse().map_err(|_| Error::Data("bad force value".into()))?;
        }
        let out = IndirectCase { case: case.to_string(), disp, force };
        out.validate(ndof)?;
        Ok(out)
    }
}

/// Central-difference accelerations: `ü_s = (u_{s+1} − 2u_s + u_{s−1})/Δt²`,
/// zero at both ends where the stencil does not fit.
pub fn acceleration_fd(disp: &[Vec<f64>], dt: f64) -> Result<Vec<Vec<f64>>> {
    if disp.len() < 3 {
        return Err(Error::Data("need at least 3 snapshots for acceleration".into()));
    }
    let ndof = disp[0].len();
    let mut acc = vec![vec![0.0; ndof]; disp.len()];
    let inv = 1.0 / (dt * dt);
    for s in 1..disp.len() - 1 {
        for d in 0..ndof {
            acc[s][d] = (disp[s + 1][d] - 2.0 * disp[s][d] + disp[s - 1][d]) * inv;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_direct() -> DirectDataset {
        DirectDataset {
            dim: 1,
            sequences: vec![DirectSequence {
                case: "t1".into(),
                gp: 0,
                eps: vec![Voigt::scalar(0.0), Voigt::scalar(0.5), Voigt::scalar(1.0)],
                sig: vec![Voigt::scalar(0.0), Voigt::scalar(1.0), Voigt::scalar(2.0)],
            }],
        }
    }

    #[test]
    fn direct_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("direct.csv");
        let data = tiny_direct();
        data.write_csv(&path).unwrap();
        let back = DirectDataset::read_csv(&path).unwrap();
        assert_eq!(back.sequences, data.sequences);
        assert_eq!(back.n_tuples(), 2);
    }

    #[test]
    fn scaling_roundtrip_is_exact_for_powers_of_two() {
        let data = tiny_direct();
        let sc = ScalingSpec { eps_ref: 0.25, sig_ref: 8.0 };
        let scaled = scale_dataset(&data, &sc).unwrap();
        let back = unscale_dataset(&scaled, &sc).unwrap();
        assert_eq!(back.sequences, data.sequences);
        // identity scaling is the identity
        let id = scale_dataset(&data, &ScalingSpec::identity()).unwrap();
        assert_eq!(id.sequences, data.sequences);
    }

    #[test]
    fn scaling_rejects_zero_refs() {
        let data = tiny_direct();
        assert!(scale_dataset(&data, &ScalingSpec { eps_ref: 0.0, sig_ref: 1.0 }).is_err());
    }

    #[test]
    fn short_sequences_are_rejected() {
        let mut data = tiny_direct();
        data.sequences[0].eps.truncate(1);
        data.sequences[0].sig.truncate(1);
        assert!(data.validate().is_err());
    }

    #[test]
    fn acceleration_examples() {
        // u = [0, 1, 4] with Δt = 1 → ü at the middle = 2 (quadratic).
        let u = vec![vec![0.0], vec![1.0], vec![4.0]];
        let acc = acceleration_fd(&u, 1.0).unwrap();
        assert_eq!(acc[1][0], 2.0);
        assert_eq!(acc[0][0], 0.0);
        assert_eq!(acc[2][0], 0.0);
        // Constant and linear-in-t displacements have zero acceleration.
        let u = vec![vec![3.0]; 5];
        let acc = acceleration_fd(&u, 0.1).unwrap();
        assert!(acc.iter().all(|a| a[0] == 0.0));
        let u: Vec<Vec<f64>> = (0..5).map(|i| vec![0.7 * i as f64]).collect();
        let acc = acceleration_fd(&u, 0.1).unwrap();
        assert!(acc.iter().all(|a| a[0].abs() < 1e-12));
    }

    #[test]
    fn indirect_case_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let case = IndirectCase {
            case: "A1".into(),
            disp: vec![vec![0.0; 4], vec![0.1, 0.2, 0.3, 0.4], vec![0.5, 0.6, 0.7, 0.8], vec![
                0.9, 1.0, 1.1, 1.2,
            ]],
            force: vec![vec![0.0; 4], vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0], vec![
                9.0, 10.0, 11.0, 12.0,
            ]],
        };
        case.write_csv(dir.path(), 2).unwrap();
        let back = IndirectCase::read_csv(dir.path(), "A1", 4, 2).unwrap();
        assert_eq!(back, case);
    }

    #[test]
    fn indirect_case_must_start_from_rest() {
        let case = IndirectCase {
            case: "bad".into(),
            disp: vec![vec![0.1; 2]; 4],
            force: vec![vec![0.0; 2]; 4],
        };
        assert!(case.validate(2).is_err());
    }
}
