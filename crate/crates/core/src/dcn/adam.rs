use super::config::DcnConfig;
use super::params::DcnParameters;
use crate::{Error, Result};

/// First and second moment estimates, one per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: DcnParameters,
    pub v: DcnParameters,
    /// Number of updates applied so far.
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &DcnParameters) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// Exponentially decayed learning rate used for the update taken at `step`
/// (zero-based): `lr · rate^(step / decay_steps)`, floored when staircase.
pub fn learning_rate_at(cfg: &DcnConfig, step: u64) -> f64 {
    let exponent = if cfg.staircase {
        (step / cfg.decay_steps) as f64
    } else {
        step as f64 / cfg.decay_steps as f64
    };
    cfg.learning_rate * cfg.decay_rate.powf(exponent)
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut DcnParameters,
    grads: &DcnParameters,
    state: &mut AdamState,
    cfg: &DcnConfig,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) {
        return Err(Error::Shape(
            "gradient or optimizer state does not match parameters".into(),
        ));
    }
    let mut bad = None;
    grads.visit(|name, _, g| {
        if bad.is_none() {
            if let Some(i) = g.iter().position(|x| !x.is_finite()) {
                bad = Some(format!("gradient of {name}[{i}] = {}", g[i]));
            }
        }
    });
    if let Some(msg) = bad {
        return Err(Error::NonFinite(msg));
    }

    let lr = learning_rate_at(cfg, state.step);
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (cfg.beta1, cfg.beta2, cfg.adam_eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    let g_all = grads.slices();
    let m_all = state.m.slices_mut();
    let v_all = state.v.slices_mut();
    for (((p, g), m), v) in params.slices_mut().into_iter().zip(g_all).zip(m_all).zip(v_all) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    params.bump_version();
    Ok(())
}
