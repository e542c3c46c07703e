//! Archive of found methods and warm starts built from smaller shapes.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{MsrkError, Result};
use crate::format;
use crate::method::MsrkMethod;
use crate::theory::gen_second_order;

/// Methods keyed by `(s, k, p)`.
#[derive(Debug, Clone, Default)]
pub struct MethodArchive {
    methods: BTreeMap<(usize, usize, usize), MsrkMethod>,
}

impl MethodArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `method` under its shape and `claimed_order`, replacing any
    /// earlier entry.
    pub fn insert(&mut self, method: MsrkMethod) {
        let key = (method.stages(), method.steps(), method.claimed_order);
        self.methods.insert(key, method);
    }

    pub fn get(&self, s: usize, k: usize, p: usize) -> Option<&MsrkMethod> {
        self.methods.get(&(s, k, p))
    }

    pub fn len(&self) -> usize {
        self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.methods.is_empty()
    }

    /// Loads every `*.msrk` file in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut archive = Self::new();
        let entries = std::fs::read_dir(dir)
            .map_err(|e| MsrkError::Config(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "msrk"))
            .collect();
        paths.sort();
        for p in paths {
            archive.insert(format::read(&p)?);
        }
        Ok(archive)
    }
}

/// The same method with an extra, unused oldest step.
pub fn pad_step(m: &MsrkMethod) -> MsrkMethod {
    let s = m.stages();
    let k = m.steps() + 1;
    let mut d = DMatrix::zeros(s, k);
    d.view_mut((0, 1), (s, k - 1)).copy_from(&m.d);
    let mut ahat = DMatrix::zeros(s, k - 1);
    ahat.view_mut((0, 1), (s, k - 2)).copy_from(&m.ahat);
    let theta = DVector::from_iterator(k, std::iter::once(0.0).chain(m.theta.iter().copied()));
    let bhat = DVector::from_iterator(k - 1, std::iter::once(0.0).chain(m.bhat.iter().copied()));
    MsrkMethod {
        name: format!("{}+step", m.name),
        claimed_order: m.claimed_order,
        d,
        ahat,
        a: m.a.clone(),
        theta,
        bhat,
        b: m.b.clone(),
    }
}

/// The same method with an extra stage that is evaluated but never used.
pub fn pad_stage(m: &MsrkMethod) -> MsrkMethod {
    let s = m.stages() + 1;
    let k = m.steps();
    let mut d = DMatrix::zeros(s, k);
    d.view_mut((0, 0), (s - 1, k)).copy_from(&m.d);
    d[(s - 1, k - 1)] = 1.0;
    let mut ahat = DMatrix::zeros(s, k - 1);
    ahat.view_mut((0, 0), (s - 1, k - 1)).copy_from(&m.ahat);
    let mut a = DMatrix::zeros(s, s);
    a.view_mut((0, 0), (s - 1, s - 1)).copy_from(&m.a);
    let b = DVector::from_iterator(s, m.b.iter().copied().chain(std::iter::once(0.0)));
    MsrkMethod {
        name: format!("{}+stage", m.name),
        claimed_order: m.claimed_order,
        d,
        ahat,
        a,
        theta: m.theta.clone(),
        bhat: m.bhat.clone(),
        b,
    }
}

/// Warm starts for an `(s,k,p)` search: archived `(s,k-1,p)` and
/// `(s-1,k,p)` methods padded to shape, plus the optimal second-order method
/// when it exists.
pub fn warm_start_ladder(archive: &MethodArchive, s: usize, k: usize, p: usize) -> Vec<MsrkMethod> {
    let mut out = Vec::new();
    if k >= 2 {
        if let Some(m) = archive.get(s, k - 1, p) {
            out.push(pad_step(m));
        }
    }
    if s >= 2 {
        if let Some(m) = archive.get(s - 1, k, p) {
            out.push(pad_stage(m));
        }
    }
    if let Ok(m) = gen_second_order(s, k) {
        out.push(m);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::method::ssprk33;
    use crate::orderlab::oracle_order;
    use crate::spijker::method_ssp_coefficient;

    #[test]
    fn ladder_contains_second_order_family() {
        let ladder = warm_start_ladder(&MethodArchive::new(), 3, 3, 2);
        assert!(ladder.contains(&gen_second_order(3, 3).unwrap()));
    }

    #[test]
    fn step_padding_keeps_order_and_coefficient() {
        let m = gen_second_order(3, 2).unwrap();
        let mut archive = MethodArchive::new();
        archive.insert(MsrkMethod {
            claimed_order: 3,
            ..m.clone()
        });
        let ladder = warm_start_ladder(&archive, 3, 3, 3);
        let padded = &ladder[0];
        assert_eq!(padded.steps(), 3);
        assert!(padded.d.column(0).iter().all(|&v| v == 0.0));
        assert!(padded.ahat.column(0).iter().all(|&v| v == 0.0));
        assert!(padded.validate().is_empty());
        let c0 = method_ssp_coefficient(&m).unwrap();
        let c1 = method_ssp_coefficient(padded).unwrap();
        assert!((c0 - c1).abs() < 1e-9);
        assert_eq!(oracle_order(padded, 4, 2, 3, 1e-9).unwrap(), 2);
    }

    #[test]
    fn stage_padding_keeps_order() {
        let padded = pad_stage(&ssprk33());
        assert_eq!(padded.stages(), 4);
        assert!(padded.validate().is_empty());
        assert_eq!(oracle_order(&padded, 4, 2, 3, 1e-9).unwrap(), 3);
    }
}
