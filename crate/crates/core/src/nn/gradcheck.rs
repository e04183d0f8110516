use candle_core::{Tensor, Var};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{to_f64_vec, ParamStore, StopGrad};
use crate::error::{Error, Result};

/// Outcome of comparing autograd against central finite differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Parameter name, flat index, autograd value, finite-difference value.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn perturb(var: &Var, base: &[f64], i: usize, delta: f64) -> Result<()> {
    let mut v = base.to_vec();
    v[i] += delta;
    let t = Tensor::from_vec(v, var.dims(), var.device())?.to_dtype(var.dtype())?;
    Ok(var.set(&t)?)
}

/// Checks `n_samples` randomly chosen parameters of `store`.
///
/// `loss` builds the scalar objective with the provided stop-gradient tape.
/// The first evaluation records the tape; every perturbed evaluation replays
/// it, so finite differences see the same frozen quantities (stop-gradient
/// values, codebook choices) as backpropagation does.
pub fn gradient_check(
    store: &ParamStore,
    n_samples: usize,
    seed: u64,
    step: f64,
    floor: f64,
    mut loss: impl FnMut(&mut StopGrad) -> Result<Tensor>,
) -> Result<GradCheckReport> {
    let mut tape = StopGrad::recording();
    let l0 = loss(&mut tape)?;
    let grads = l0.backward()?;
    let params: Vec<(String, Var)> = store.iter().map(|(n, v)| (n.to_string(), v.clone())).collect();
    let sizes: Vec<usize> = params.iter().map(|(_, v)| v.elem_count()).collect();
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(Error::Missing("no parameters to check".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, total, n_samples.min(total)).into_vec();
    let mut report = GradCheckReport { checked: 0, max_rel_error: 0.0, worst: None };
    let mut eval = |tape: &mut StopGrad| -> Result<f64> {
        tape.rewind();
        Ok(to_f64_vec(&loss(tape)?)?[0])
    };
    for flat in picks {
        let (mut p, mut i) = (0, flat);
        while i >= sizes[p] {
            i -= sizes[p];
            p += 1;
        }
        let (name, var) = &params[p];
        let base = to_f64_vec(var.as_tensor())?;
        let analytic = match grads.get(var.as_tensor()) {
            Some(g) => to_f64_vec(g)?[i],
            None => 0.0,
        };
        perturb(var, &base, i, step)?;
        let plus = eval(&mut tape)?;
        perturb(var, &base, i, -step)?;
        let minus = eval(&mut tape)?;
        perturb(var, &base, i, 0.0)?;
        let numeric = (plus - minus) / (2.0 * step);
        let err = relative_error(analytic, numeric, floor);
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((name.clone(), i, analytic, numeric));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::DType;

    #[test]
    fn quadratic_gradients_match() {
        let mut ps = ParamStore::new(DType::F64, 4);
        let w = ps.uniform("w", &[5], 1.0).unwrap();
        let r = gradient_check(&ps, 5, 0, 1e-6, 1e-8, |_| {
            Ok((w.sqr()? * 3.0)?.sum_all()?.exp()?)
        })
        .unwrap();
        assert_eq!(r.checked, 5);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let mut ps = ParamStore::new(DType::F64, 4);
        let w = ps.uniform("w", &[3], 1.0).unwrap();
        // A raw detach (not routed through the tape) hides part of the
        // dependence from autograd but not from the perturbed runs.
        let r = gradient_check(&ps, 3, 0, 1e-6, 1e-8, |_| {
            Ok((w.sqr()? * w.detach())?.sum_all()?)
        })
        .unwrap();
        assert!(r.max_rel_error > 0.1);
    }
}
