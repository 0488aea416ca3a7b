use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::image::{filter_components, label_components, open3, BinaryImage, Components, DepthImage};
use crate::forest::RandomForest;
use crate::par;

/// Class id of "touch" in the 2-class component classifier.
pub const TOUCH_CLASS: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TouchSettings {
    /// Raw depths beyond this (metres) are ignored.
    pub max_depth: f32,
    /// Stand-in depth for raycast misses.
    pub miss_depth: f32,
    /// τ, metres.
    pub tau: f32,
    /// γ, metres.
    pub gamma: f32,
    pub min_area: usize,
    /// A_max as a fraction of the image.
    pub max_area_fraction: f64,
    pub histogram_bins: usize,
    pub histogram_max: f32,
    /// Down-scaling factor for touch points.
    pub quantisation: usize,
}

impl Default for TouchSettings {
    fn default() -> Self {
        TouchSettings {
            max_depth: 2.0,
            miss_depth: 100.0,
            tau: 0.010,
            gamma: 0.025,
            min_area: 150,
            max_area_fraction: 0.4,
            histogram_bins: 64,
            histogram_max: 0.5,
            quantisation: 4,
        }
    }
}

/// Thresholded raw depth D and hole-filled raycast depth R.
pub fn prepare_inputs(raw: &DepthImage, scene_depth: &[f32], s: &TouchSettings) -> (DepthImage, DepthImage) {
    assert_eq!(raw.data.len(), scene_depth.len(), "raw and raycast sizes differ");
    let d = raw.data.iter().map(|&v| if v.is_finite() && v > 0.0 && v <= s.max_depth { v } else { -1.0 }).collect();
    let r = scene_depth.iter().map(|&v| if v.is_finite() && v > 0.0 { v } else { s.miss_depth }).collect();
    (DepthImage::new(raw.width, raw.height, d), DepthImage::new(raw.width, raw.height, r))
}

/// Eq. (changedetection) evaluated per pixel, before denoising.
pub fn raw_change_mask(d: &DepthImage, r: &DepthImage, tau: f32) -> BinaryImage {
    let w = d.width;
    let mut out = vec![0u8; d.data.len()];
    par::for_each_chunk_mut(&mut out, w.max(1), |y, row| {
        let (dr, rr) = (&d.data[y * w..(y + 1) * w], &r.data[y * w..(y + 1) * w]);
        for x in 0..row.len() {
            row[x] = (dr[x] >= 0.0 && (dr[x] - rr[x]).abs() > tau) as u8;
        }
    });
    BinaryImage { width: d.width, height: d.height, data: out }
}

/// Change mask followed by a 3×3 morphological open.
pub fn change_mask(d: &DepthImage, r: &DepthImage, tau: f32) -> BinaryImage {
    open3(&raw_change_mask(d, r, tau))
}

/// S = |D − R|.
pub fn difference_image(d: &DepthImage, r: &DepthImage) -> Vec<f32> {
    d.data.iter().zip(&r.data).map(|(a, b)| (a - b).abs()).collect()
}

/// Unnormalised histogram of S over each component's pixels; values past
/// the range land in the last bin.
pub fn component_histograms(c: &Components, s: &[f32], bins: usize, max: f32) -> Vec<Vec<f32>> {
    let mut h = vec![vec![0f32; bins]; c.len()];
    for (i, &k) in c.labels.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let b = ((s[i] / max * bins as f32) as usize).min(bins - 1);
        h[k as usize - 1][b] += 1.0;
    }
    h
}

/// `(k̂, y_k̂)` if the most touch-like component has y > 0.5. Components are
/// numbered from 1.
pub fn score_candidates(histograms: &[Vec<f32>], classifier: &RandomForest) -> (Vec<f64>, Option<(u32, f64)>) {
    let ys: Vec<f64> =
        histograms.iter().map(|h| classifier.predict_pmf(h).map(|p| p.get(TOUCH_CLASS)).unwrap_or(0.0)).collect();
    let mut best: Option<(u32, f64)> = None;
    for (k, &y) in ys.iter().enumerate() {
        if best.is_none_or(|(_, b)| y > b) {
            best = Some((k as u32 + 1, y));
        }
    }
    (ys, best.filter(|&(_, y)| y > 0.5))
}

/// Touch points of component `k`: pixels with τ < S′ < γ, quantised by
/// nearest-neighbour down-scaling with factor `q`, in full-resolution
/// coordinates.
pub fn extract_touch_points(c: &Components, k: u32, s: &[f32], tau: f32, gamma: f32, q: usize) -> Vec<(usize, usize)> {
    let q = q.max(1);
    let mut out = Vec::new();
    for y in (0..c.height).step_by(q) {
        for x in (0..c.width).step_by(q) {
            let i = y * c.width + x;
            let sp = if c.labels[i] == k { s[i] } else { 0.0 };
            if sp > tau && sp < gamma {
                out.push((x, y));
            }
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TouchOutcome {
    pub touch_points: Vec<(usize, usize)>,
    /// Selected component and its touch probability.
    pub best: Option<(u32, f64)>,
    pub probabilities: Vec<f64>,
    pub component_areas: Vec<usize>,
    pub elapsed_ms: f64,
}

impl TouchOutcome {
    pub fn is_touch(&self) -> bool {
        !self.touch_points.is_empty()
    }
}

/// Intermediate images of one pipeline run.
pub struct TouchStages {
    pub d: DepthImage,
    pub r: DepthImage,
    pub s: Vec<f32>,
    pub mask: BinaryImage,
    pub components: Components,
    pub histograms: Vec<Vec<f32>>,
}

pub fn run_stages(raw: &DepthImage, scene_depth: &[f32], s: &TouchSettings) -> TouchStages {
    let (d, r) = prepare_inputs(raw, scene_depth, s);
    let mask = change_mask(&d, &r, s.tau);
    let max_area = (s.max_area_fraction * (raw.width * raw.height) as f64) as usize;
    let components = filter_components(&label_components(&mask), s.min_area, max_area);
    let diff = difference_image(&d, &r);
    let histograms = component_histograms(&components, &diff, s.histogram_bins, s.histogram_max);
    TouchStages { d, r, s: diff, mask, components, histograms }
}

/// The full Appendix D pipeline with a component classifier.
#[derive(Clone, Debug)]
pub struct TouchDetector {
    pub settings: TouchSettings,
    pub classifier: RandomForest,
}

impl TouchDetector {
    pub fn new(settings: TouchSettings, classifier: RandomForest) -> Self {
        TouchDetector { settings, classifier }
    }

    pub fn detect(&self, raw: &DepthImage, scene_depth: &[f32]) -> TouchOutcome {
        let t0 = Instant::now();
        let st = run_stages(raw, scene_depth, &self.settings);
        let (probabilities, best) = score_candidates(&st.histograms, &self.classifier);
        let touch_points = match best {
            Some((k, _)) => extract_touch_points(
                &st.components,
                k,
                &st.s,
                self.settings.tau,
                self.settings.gamma,
                self.settings.quantisation,
            ),
            None => Vec::new(),
        };
        TouchOutcome {
            touch_points,
            best,
            probabilities,
            component_areas: st.components.areas.clone(),
            elapsed_ms: t0.elapsed().as_secs_f64() * 1e3,
        }
    }
}
