//! Browser bindings: a wave-covariance heatmap, Kirchhoff propagation of a
//! Gaussian pulse and kriging on the x-t plane.

use wasm_bindgen::prelude::*;
use wavegp::{fit_posterior, kirchhoff_propagate, KernelSpec, ObservationSet, Point3, SpacetimePoint, SphereRule};
use wavegp::{WaveModel, WaveModelSpec};

// interactive speed matters more than the last digits here
const N_THETA: usize = 6;
const N_PHI: usize = 12;

fn model(c: f64, ku_lengthscale: f64, kv_lengthscale: f64) -> wavegp::Result<WaveModel> {
    WaveModel::new(WaveModelSpec {
        c,
        ku: KernelSpec::squared_exp(ku_lengthscale)?,
        kv: KernelSpec::squared_exp(kv_lengthscale)?,
        n_theta: N_THETA,
        n_phi: N_PHI,
    })
}

fn axis(n: usize, lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
}

fn on_plane(x: f64, t: f64) -> SpacetimePoint {
    SpacetimePoint::new(x, 0.0, 0.0, t)
}

/// `kw((x, 0, 0, t), (0, 0, 0, t_ref))`, row-major with `t` along rows.
#[allow(clippy::too_many_arguments)]
pub fn kw_heatmap(
    c: f64,
    ku_lengthscale: f64,
    kv_lengthscale: f64,
    t_ref: f64,
    nx: usize,
    nt: usize,
    x_max: f64,
    t_max: f64,
) -> wavegp::Result<Vec<f64>> {
    let m = model(c, ku_lengthscale, kv_lengthscale)?;
    let r = on_plane(0.0, t_ref);
    Ok(axis(nt, t_max, -t_max)
        .flat_map(|t| axis(nx, -x_max, x_max).map(move |x| on_plane(x, t)))
        .map(|z| m.kw(&z, &r))
        .collect())
}

/// Gaussian pulse `u0 = exp(-|x|^2 / 2w^2)`, `v0 = 0`, at time `t` along the x axis.
pub fn pulse(c: f64, width: f64, t: f64, nx: usize, x_max: f64) -> wavegp::Result<Vec<f64>> {
    if width.is_nan() || width <= 0.0 {
        return Err(wavegp::Error::InvalidSpec(format!("pulse width must be positive, got {width}")));
    }
    let rule = SphereRule::new(32, 32)?;
    let w2 = width * width;
    let u0 = |x: &Point3| (-0.5 * x.norm_squared() / w2).exp();
    let grad = |x: &Point3| -x * (-0.5 * x.norm_squared() / w2).exp() / w2;
    Ok(axis(nx, -x_max, x_max).map(|x| kirchhoff_propagate(u0, grad, |_| 0.0, c, &rule, &on_plane(x, t))).collect())
}

/// Posterior mean and std interleaved, row-major with `t` along rows.
#[allow(clippy::too_many_arguments)]
pub fn krige_slice(
    c: f64,
    lengthscale: f64,
    obs_x: &[f64],
    obs_t: &[f64],
    obs_v: &[f64],
    nx: usize,
    nt: usize,
    x_max: f64,
    t_max: f64,
) -> wavegp::Result<Vec<f64>> {
    if obs_x.len() != obs_v.len() || obs_t.len() != obs_v.len() {
        return Err(wavegp::Error::DimensionMismatch { expected: obs_v.len(), got: obs_x.len().min(obs_t.len()) });
    }
    let m = model(c, lengthscale, lengthscale)?;
    let pts: Vec<SpacetimePoint> = obs_x.iter().zip(obs_t).map(|(&x, &t)| on_plane(x, t)).collect();
    let post = fit_posterior(m, ObservationSet::with_jitter(pts, obs_v.to_vec(), 1e-8)?)?;
    let grid: Vec<SpacetimePoint> =
        axis(nt, t_max, -t_max).flat_map(|t| axis(nx, -x_max, x_max).map(move |x| on_plane(x, t))).collect();
    Ok(post.predict(&grid).into_iter().flat_map(|(mean, std)| [mean, std]).collect())
}

fn js(e: wavegp::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = kwHeatmap)]
#[allow(clippy::too_many_arguments)]
pub fn kw_heatmap_js(
    c: f64,
    ku_lengthscale: f64,
    kv_lengthscale: f64,
    t_ref: f64,
    nx: usize,
    nt: usize,
    x_max: f64,
    t_max: f64,
) -> Result<Vec<f64>, JsError> {
    kw_heatmap(c, ku_lengthscale, kv_lengthscale, t_ref, nx, nt, x_max, t_max).map_err(js)
}

#[wasm_bindgen(js_name = pulse)]
pub fn pulse_js(c: f64, width: f64, t: f64, nx: usize, x_max: f64) -> Result<Vec<f64>, JsError> {
    pulse(c, width, t, nx, x_max).map_err(js)
}

#[wasm_bindgen(js_name = krigeSlice)]
#[allow(clippy::too_many_arguments)]
pub fn krige_slice_js(
    c: f64,
    lengthscale: f64,
    obs_x: Vec<f64>,
    obs_t: Vec<f64>,
    obs_v: Vec<f64>,
    nx: usize,
    nt: usize,
    x_max: f64,
    t_max: f64,
) -> Result<Vec<f64>, JsError> {
    krige_slice(c, lengthscale, &obs_x, &obs_t, &obs_v, nx, nt, x_max, t_max).map_err(js)
}

#[wasm_bindgen]
pub fn version() -> String {
    wavegp::VERSION.to_string()
}
