//! Prioritized cascade: each level's weighted slack norm is minimized with
//! higher levels frozen, then the input deviation is minimized last.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::qp::{check_feasibility, Status};
use crate::system::{
    build_constraint_row_with_rate, Certificate, CertificateKind, ConstraintRow,
    ControlAffineSystem,
};

use super::builder::{SlackTerm, StageBuilder};
use super::{stage_error, ControlResult, FrameworkConfig, Method, StageDiagnostics, STAGE_PULL};

/// One certificate inside a priority level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityEntry {
    /// Index into the certificate slice passed to [`solve_priority_list`].
    pub certificate: usize,
    pub weight: f64,
    pub rate: f64,
}

/// Levels ordered from highest priority to lowest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriorityList {
    pub levels: Vec<Vec<PriorityEntry>>,
}

impl PriorityList {
    pub fn validate(&self, num_certificates: usize) -> Result<()> {
        let mut seen = vec![false; num_certificates];
        for entry in self.levels.iter().flatten() {
            let slot = seen.get_mut(entry.certificate).ok_or_else(|| {
                Error::Validation(format!(
                    "priority entry refers to certificate {}",
                    entry.certificate
                ))
            })?;
            if *slot {
                return Err(Error::Validation(format!(
                    "certificate {} appears in more than one priority slot",
                    entry.certificate
                )));
            }
            *slot = true;
            if !(entry.weight > 0.0 && entry.weight.is_finite()) {
                return Err(Error::Validation(format!(
                    "priority weight must be positive, got {}",
                    entry.weight
                )));
            }
            if !(entry.rate > 0.0 && entry.rate.is_finite()) {
                return Err(Error::Validation(format!(
                    "priority rate must be positive, got {}",
                    entry.rate
                )));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!(
                "certificate {missing} has no priority level"
            )));
        }
        if self.levels.iter().any(Vec::is_empty) {
            return Err(Error::Validation("priority levels must be nonempty".into()));
        }
        Ok(())
    }
}

/// One barrier per level in ascending order of `h(x)` (ties by index), then
/// all Lyapunov certificates together on the lowest level. Weights are 1 and
/// rates are the certificates' own.
pub fn priority_by_barrier_value(certs: &[Certificate], x: &DVector<f64>) -> Result<PriorityList> {
    let entry = |i: usize| PriorityEntry {
        certificate: i,
        weight: 1.0,
        rate: certs[i].decay_rate(),
    };
    let mut barriers: Vec<(f64, usize)> = certs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind() == CertificateKind::Barrier)
        .map(|(i, c)| (c.value(x), i))
        .collect();
    if barriers.iter().any(|(h, _)| !h.is_finite()) {
        return Err(Error::Numerical("barrier value is not finite".into()));
    }
    barriers.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut levels: Vec<Vec<PriorityEntry>> =
        barriers.into_iter().map(|(_, i)| vec![entry(i)]).collect();
    let clfs: Vec<PriorityEntry> = (0..certs.len())
        .filter(|&i| certs[i].kind() == CertificateKind::Lyapunov)
        .map(entry)
        .collect();
    if !clfs.is_empty() {
        levels.push(clfs);
    }
    Ok(PriorityList { levels })
}

/// Two-level cascade: CBF slack first, then CLF slack, then input deviation.
pub fn solve_safety_first(
    sys: &ControlAffineSystem,
    clf: &Certificate,
    cbf: &Certificate,
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
) -> Result<ControlResult> {
    let certs = [clf.clone(), cbf.clone()];
    let plist = PriorityList {
        levels: vec![
            vec![PriorityEntry {
                certificate: 1,
                weight: 1.0,
                rate: cbf.decay_rate(),
            }],
            vec![PriorityEntry {
                certificate: 0,
                weight: 1.0,
                rate: clf.decay_rate(),
            }],
        ],
    };
    solve_priority_list(sys, &certs, &plist, cfg, x)
}

/// Runs the cascade described by `plist` over `certs`.
///
/// A level whose rows are jointly satisfiable with zero slack (given the
/// input set and frozen higher levels) gets exactly zero slacks without a
/// QP. Rows of lower levels are left out of a level's stage: their own slacks
/// are free there, so they cannot restrict it.
///
/// `delta1` reports the first Lyapunov certificate's slack and `delta2` the
/// barrier slacks in certificate order.
pub fn solve_priority_list(
    sys: &ControlAffineSystem,
    certs: &[Certificate],
    plist: &PriorityList,
    cfg: &FrameworkConfig,
    x: &DVector<f64>,
) -> Result<ControlResult> {
    plist.validate(certs.len())?;
    cfg.validate(sys.input_dim())?;
    let k = sys.nominal(x)?;
    let mut rows: Vec<Option<ConstraintRow>> = vec![None; certs.len()];
    for entry in plist.levels.iter().flatten() {
        let c = entry.certificate;
        rows[c] = Some(build_constraint_row_with_rate(
            &certs[c],
            entry.rate,
            sys,
            x,
            Some(c),
        )?);
    }
    let rows: Vec<ConstraintRow> = rows.into_iter().map(|r| r.expect("validated")).collect();

    let mut slack = vec![0.0; certs.len()];
    let mut stages = Vec::with_capacity(plist.levels.len() + 1);
    let frozen_stage = |levels: &[Vec<PriorityEntry>], slack: &[f64], extra: usize| {
        let mut stage = StageBuilder::new(&k, extra);
        stage.input_polytope(sys.input_polytope());
        for entry in levels.iter().flatten() {
            stage.certificate_row(
                &rows[entry.certificate],
                SlackTerm::Fixed(slack[entry.certificate]),
            );
        }
        stage
    };

    for (depth, level) in plist.levels.iter().enumerate() {
        let label = format!("level-{}", depth + 1);
        let mut stage = frozen_stage(&plist.levels[..depth], &slack, level.len());
        let mut probe = frozen_stage(&plist.levels[..depth], &slack, 0);
        for entry in level {
            probe.certificate_row(&rows[entry.certificate], SlackTerm::Zero);
        }
        let (a, b) = probe.constraints();
        if check_feasibility(&a, &b)?.feasible {
            for entry in level {
                slack[entry.certificate] = 0.0;
            }
            stages.push(StageDiagnostics::skipped(&label));
            continue;
        }
        stage.input_cost(&cfg.input_weight, STAGE_PULL);
        for (j, entry) in level.iter().enumerate() {
            stage
                .extra_cost(j, 2.0 * entry.weight, 0.0)
                .certificate_row(
                    &rows[entry.certificate],
                    SlackTerm::Var {
                        index: j,
                        scale: 1.0,
                    },
                );
        }
        let out = stage.solve(&label)?;
        if !out.is_optimal() {
            return Err(stage_error(&label, &out.solution));
        }
        for (j, entry) in level.iter().enumerate() {
            slack[entry.certificate] = out.extra(j);
        }
        stages.push(out.diagnostics);
    }

    let mut last = frozen_stage(&plist.levels, &slack, 0);
    last.input_cost(&cfg.input_weight, 1.0);
    let out = last.solve("input")?;
    if !out.is_optimal() {
        return Err(stage_error("input", &out.solution));
    }
    let u = out.input();
    stages.push(out.diagnostics);

    let delta1 = certs
        .iter()
        .position(|c| c.kind() == CertificateKind::Lyapunov)
        .map_or(0.0, |i| slack[i]);
    let delta2 = certs
        .iter()
        .zip(&slack)
        .filter(|(c, _)| c.kind() == CertificateKind::Barrier)
        .map(|(_, &s)| s)
        .collect();
    Ok(ControlResult {
        u,
        delta1,
        delta2,
        omega: None,
        status: Status::Optimal,
        stages,
        method: Method::SafetyFirst,
    })
}
