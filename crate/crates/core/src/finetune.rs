//! Greedy local refinement of an optimized placement set on a finer, off-grid lattice.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{EvalContext, ObjectiveVector};
use crate::placement::{is_favoured, BasePlacement, PlanarPolygon, ReachLimits};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FineTuneConfig {
    /// Half-width of the square search window around each placement, m.
    pub radius: f64,
    pub xy_step: f64,
    /// Heading change tried on either side of the current heading, rad.
    pub theta_step: f64,
    /// Headings tried per side: offsets `-n..=n` times `theta_step`.
    pub theta_steps: usize,
    pub min_spacing: f64,
    pub max_sweeps: usize,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self {
            radius: 0.15,
            xy_step: 0.025,
            theta_step: 15f64.to_radians(),
            theta_steps: 1,
            min_spacing: 0.2,
            max_sweeps: 20,
        }
    }
}

impl FineTuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xy_step > 0.0 && self.theta_step > 0.0) {
            return Err(Error::InvalidInput("fine-tune steps must be positive".into()));
        }
        if !(self.radius >= self.xy_step) {
            return Err(Error::InvalidInput(
                "fine-tune radius must be at least one step".into(),
            ));
        }
        Ok(())
    }

    /// Every pose of the local window around `bp` except `bp` itself, x slowest then y then
    /// heading.
    pub fn neighbourhood(&self, bp: &BasePlacement) -> Vec<BasePlacement> {
        let n = (self.radius / self.xy_step + 1e-9).floor() as i64;
        let t = self.theta_steps as i64;
        let mut out = Vec::with_capacity(((2 * n + 1).pow(2) * (2 * t + 1)) as usize);
        for i in -n..=n {
            for j in -n..=n {
                for k in -t..=t {
                    if (i, j, k) == (0, 0, 0) {
                        continue;
                    }
                    out.push(BasePlacement::new(
                        bp.id,
                        bp.x + i as f64 * self.xy_step,
                        bp.y + j as f64 * self.xy_step,
                        bp.theta + k as f64 * self.theta_step,
                    ));
                }
            }
        }
        out
    }
}

/// Ordering used for acceptance: coverage, then manipulability, then shorter time.
pub fn compare_objectives(a: &ObjectiveVector, b: &ObjectiveVector) -> Ordering {
    a.f1.total_cmp(&b.f1)
        .then(a.f3.total_cmp(&b.f3))
        .then(b.f2.total_cmp(&a.f2))
}

/// Rules a refined placement must keep satisfying.
#[derive(Debug, Clone, Copy)]
pub struct PlacementRules<'a> {
    pub footprint_obstacles: &'a [PlanarPolygon],
    pub limits: ReachLimits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneResult {
    pub placements: Vec<BasePlacement>,
    pub before: ObjectiveVector,
    pub after: ObjectiveVector,
    pub sweeps: usize,
    pub moves: usize,
}

fn spaced_from_others(candidate: &BasePlacement, others: &[BasePlacement], skip: usize, min: f64) -> bool {
    others
        .iter()
        .enumerate()
        .all(|(i, o)| i == skip || candidate.planar_distance(o) >= min)
}

/// Coordinate-wise hill climb. Each placement in turn moves to the best valid pose in its
/// window when that strictly improves the set; sweeps repeat until nothing moves or
/// `max_sweeps` is reached. The returned set never scores below the input.
pub fn local_search(
    placements: &[BasePlacement],
    config: &FineTuneConfig,
    ctx: &EvalContext,
    rules: PlacementRules,
) -> Result<FineTuneResult> {
    config.validate()?;
    if placements.is_empty() {
        return Err(Error::InvalidInput("nothing to fine-tune".into()));
    }
    let model = ctx.model();
    let mut current = placements.to_vec();
    let mut rows: Vec<_> = current.iter().map(|p| ctx.placement_row(p)).collect();
    let before = ctx.evaluate_placements(&current)?.objectives;
    let mut score = before;
    let mut sweeps = 0;
    let mut moves = 0;
    while sweeps < config.max_sweeps {
        sweeps += 1;
        let mut moved = false;
        for k in 0..current.len() {
            let variants: Vec<BasePlacement> = config
                .neighbourhood(&current[k])
                .into_iter()
                .filter(|v| {
                    is_favoured(v, model, rules.footprint_obstacles, ctx.slds(), rules.limits)
                        && spaced_from_others(v, &current, k, config.min_spacing)
                })
                .collect();
            let scored = variants
                .par_iter()
                .map(|v| {
                    let row = ctx.placement_row(v);
                    let mut trial = current.clone();
                    trial[k] = *v;
                    let mut trial_rows: Vec<_> = rows.iter().map(|r| r.as_ref()).collect();
                    trial_rows[k] = row.as_ref();
                    Ok((ctx.evaluate_rows(&trial, &trial_rows)?.objectives, row))
                })
                .collect::<Result<Vec<_>>>()?;
            // first variant wins ties so the result does not depend on evaluation order
            let best = scored.iter().map(|(s, _)| s).enumerate().fold(
                None::<(usize, &ObjectiveVector)>,
                |acc, (i, s)| match acc {
                    Some((_, b)) if compare_objectives(s, b) != Ordering::Greater => acc,
                    _ => Some((i, s)),
                },
            );
            if let Some((i, s)) = best {
                if compare_objectives(s, &score) == Ordering::Greater {
                    current[k] = variants[i];
                    rows[k] = scored[i].1.clone();
                    score = *s;
                    moves += 1;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    Ok(FineTuneResult {
        placements: current,
        before,
        after: score,
        sweeps,
        moves,
    })
}
