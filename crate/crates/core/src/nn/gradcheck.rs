//! Central finite-difference verification of analytic gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::head;
use super::model::{activation_signs, forward, loss_and_grad, Instance, Mode};
use super::params::{ModelConfig, ModelParams};
use super::NnError;

pub const STEP: f64 = 1e-5;
/// Gradients below this magnitude are compared absolutely.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub tensor: &'static str,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub probes: Vec<Probe>,
    /// Probes dropped because a perturbation changed the max routing or
    /// crossed a ReLU kink.
    pub skipped: usize,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn failures(&self, tol: f64) -> Vec<&Probe> {
        self.probes.iter().filter(|p| p.rel_error > tol).collect()
    }

    pub fn passed(&self, tol: f64) -> bool {
        !self.probes.is_empty() && self.failures(tol).is_empty()
    }
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

/// Compares `analytic` against `(f(θ+h) − f(θ−h)) / 2h` at each
/// `(tensor, index)` probe. `loss` returns `None` when a perturbed point is
/// not comparable (the probe is then skipped).
pub fn check_gradients<F>(
    params: &ModelParams,
    analytic: &ModelParams,
    probes: &[(usize, usize)],
    h: f64,
    loss: F,
) -> GradCheckReport
where
    F: Fn(&ModelParams) -> Option<f64>,
{
    let grads = analytic.named();
    let mut out = Vec::new();
    let mut skipped = 0;
    for &(ti, idx) in probes {
        let mut q = params.clone();
        let orig = q.named()[ti].1.data[idx];
        q.named_mut()[ti].1.data[idx] = orig + h;
        let up = loss(&q);
        q.named_mut()[ti].1.data[idx] = orig - h;
        let down = loss(&q);
        let (Some(up), Some(down)) = (up, down) else {
            skipped += 1;
            continue;
        };
        let numeric = (up - down) / (2.0 * h);
        let (name, g) = grads[ti];
        let a = g.data[idx];
        out.push(Probe {
            tensor: name,
            index: idx,
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric),
        });
    }
    let max_rel_error = out.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    GradCheckReport {
        probes: out,
        skipped,
        max_rel_error,
    }
}

/// One probe per tensor, preferring entries with a non-zero gradient, then
/// random non-zero entries up to `max`.
pub fn select_probes(analytic: &ModelParams, max: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    let mut pool = Vec::new();
    for (ti, (_, t)) in analytic.named().into_iter().enumerate() {
        let mut nz: Vec<usize> = (0..t.len()).filter(|&i| t.data[i].abs() > 1e-12).collect();
        nz.shuffle(&mut rng);
        if let Some(&first) = nz.first() {
            chosen.push((ti, first));
            pool.extend(nz[1..].iter().map(|&i| (ti, i)));
        } else if !t.is_empty() {
            chosen.push((ti, 0));
        }
    }
    chosen.truncate(max);
    pool.shuffle(&mut rng);
    for p in pool {
        if chosen.len() >= max {
            break;
        }
        chosen.push(p);
    }
    chosen
}

/// End-to-end check of [`loss_and_grad`] on `inst`. Fails with the
/// offending parameters when any probe exceeds `tol`.
pub fn gradient_check(
    params: &ModelParams,
    cfg: &ModelConfig,
    inst: &Instance,
    labels: &[bool],
    mode: Mode,
    max_probes: usize,
    seed: u64,
    tol: f64,
) -> Result<GradCheckReport, NnError> {
    let (_, grads, batch) = loss_and_grad(params, cfg, inst, labels, mode)?;
    let signs = activation_signs(params, cfg, inst, mode)?;
    let probes = select_probes(&grads, max_probes, seed);
    let report = check_gradients(params, &grads, &probes, STEP, |q| {
        let b = forward(q, cfg, inst, mode).ok()?;
        let smooth = b.argmax == batch.argmax && activation_signs(q, cfg, inst, mode).ok()? == signs;
        smooth.then(|| head::loss(&b.final_conf, labels))
    });
    let bad = report.failures(tol);
    if report.probes.is_empty() || !bad.is_empty() {
        let list: Vec<String> = bad
            .iter()
            .map(|p| {
                format!(
                    "{}[{}] analytic {:.6e} numeric {:.6e}",
                    p.tensor, p.index, p.analytic, p.numeric
                )
            })
            .collect();
        return Err(NnError::GradCheck(if list.is_empty() {
            "no comparable probes".into()
        } else {
            list.join("; ")
        }));
    }
    Ok(report)
}
