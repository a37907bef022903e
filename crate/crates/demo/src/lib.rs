//! Browser bindings for three interactive views: the Calabi speed of a
//! Kähler–Ricci flow line, the chord/segment bracket on an `L^{p/q}` sphere,
//! and the density of a smoothed maximum on the torus.
//!
//! The plain functions are native Rust so they can be tested off the browser;
//! the `#[wasm_bindgen]` wrappers only convert errors.

use std::f64::consts::TAU;

use calabi_lab::backend::{make_p1_geometry, make_torus_geometry};
use calabi_lab::experiments::families::crossing_pair;
use calabi_lab::experiments::suites::zonal_start;
use calabi_lab::experiments::{level_set_charge, smooth_max_potential};
use calabi_lab::flows::{flow_length_criterion, kr_flow_run, FlowControls};
use calabi_lab::lpq_sphere::{chord_distance, segment_length_quadrature, sphere_project, MeasureSpace};
use calabi_lab::Result;
use wasm_bindgen::prelude::*;

/// `g(t)` along a flow line plus its fitted rate and length.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct SpeedCurve {
    times: Vec<f64>,
    speeds: Vec<f64>,
    rate: f64,
    length: f64,
}

#[wasm_bindgen]
impl SpeedCurve {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn speeds(&self) -> Vec<f64> {
        self.speeds.clone()
    }
    /// fitted exponential decay rate, `NaN` when `g` vanished before the fit window
    #[wasm_bindgen(getter)]
    pub fn rate(&self) -> f64 {
        self.rate
    }
    /// `∫ g dt` including the fitted tail
    #[wasm_bindgen(getter)]
    pub fn length(&self) -> f64 {
        self.length
    }
}

/// Kähler–Ricci flow on ℙ¹ from `a (P₂ + 0.3 P₄)`; `p ≤ 0` means `p = ∞`.
pub fn kr_speed(resolution: usize, amplitude: f64, p: f64, q: f64, t_end: f64) -> Result<SpeedCurve> {
    let g = make_p1_geometry(resolution)?;
    let traj = kr_flow_run(&zonal_start(&g, amplitude)?, 0.01, t_end, FlowControls::default())?;
    let p = if p <= 0.0 { f64::INFINITY } else { p };
    let r = flow_length_criterion(&traj, p, q)?;
    Ok(SpeedCurve {
        rate: r.rate().unwrap_or(f64::NAN),
        length: r.integral_with_tail,
        times: r.times,
        speeds: r.g,
    })
}

/// Chord and segment length between two projected profiles.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Bracket {
    first: Vec<f64>,
    second: Vec<f64>,
    chord: f64,
    segment: f64,
}

#[wasm_bindgen]
impl Bracket {
    /// first profile after projection onto the sphere of radius `p/q`
    #[wasm_bindgen(getter)]
    pub fn first(&self) -> Vec<f64> {
        self.first.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn second(&self) -> Vec<f64> {
        self.second.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn chord(&self) -> f64 {
        self.chord
    }
    /// length of the normalized segment, an upper bound for the sphere distance
    #[wasm_bindgen(getter)]
    pub fn segment(&self) -> f64 {
        self.segment
    }
}

fn profile(n: usize, centre: f64, sharpness: f64) -> Vec<f64> {
    (0..n)
        .map(|i| (sharpness * (TAU * ((i as f64 + 0.5) / n as f64 - centre)).cos()).exp())
        .collect()
}

/// Two periodic bumps `exp(s cos 2π(x - c))` on `n` equal atoms of total mass one.
pub fn sphere_bracket(p: f64, q: f64, c0: f64, c1: f64, sharpness: f64, n: usize) -> Result<Bracket> {
    let mu = MeasureSpace::uniform(n, 1.0)?;
    let r = p / q;
    let f0 = sphere_project(&profile(n, c0, sharpness), p, q, r, &mu)?;
    let f1 = sphere_project(&profile(n, c1, sharpness), p, q, r, &mu)?;
    let chord = chord_distance(&f0, &f1, p, &mu)?;
    let segment = segment_length_quadrature(&f0, &f1, p, &mu, 8)?;
    Ok(Bracket {
        first: f0.into_values(),
        second: f1.into_values(),
        chord,
        segment,
    })
}

/// Density of the smoothed maximum on the torus, row-major with `x` fastest.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct DensityField {
    resolution: usize,
    density: Vec<f64>,
    charge: f64,
}

#[wasm_bindgen]
impl DensityField {
    #[wasm_bindgen(getter)]
    pub fn resolution(&self) -> usize {
        self.resolution
    }
    #[wasm_bindgen(getter)]
    pub fn density(&self) -> Vec<f64> {
        self.density.clone()
    }
    /// mass the limiting measure puts on the crossing curve
    #[wasm_bindgen(getter)]
    pub fn charge(&self) -> f64 {
        self.charge
    }
}

/// `ε = 0` gives the exact maximum.
pub fn max_smoothing_density(resolution: usize, eps: f64) -> Result<DensityField> {
    let g = make_torus_geometry(resolution)?;
    let (v0, v1) = crossing_pair(&g, 0.02)?;
    let u = smooth_max_potential(&v0, &v1, eps)?;
    Ok(DensityField {
        resolution,
        density: u.density_values().to_vec(),
        charge: level_set_charge(&v0, &v1),
    })
}

fn js(e: calabi_lab::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = krSpeed)]
pub fn kr_speed_js(resolution: usize, amplitude: f64, p: f64, q: f64, t_end: f64) -> std::result::Result<SpeedCurve, JsError> {
    kr_speed(resolution, amplitude, p, q, t_end).map_err(js)
}

#[wasm_bindgen(js_name = sphereBracket)]
pub fn sphere_bracket_js(p: f64, q: f64, c0: f64, c1: f64, sharpness: f64) -> std::result::Result<Bracket, JsError> {
    sphere_bracket(p, q, c0, c1, sharpness, 128).map_err(js)
}

#[wasm_bindgen(js_name = maxSmoothingDensity)]
pub fn max_smoothing_density_js(resolution: usize, eps: f64) -> std::result::Result<DensityField, JsError> {
    max_smoothing_density(resolution, eps).map_err(js)
}
