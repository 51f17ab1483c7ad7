//! Joint probabilistic data association by exact event enumeration.
//!
//! A joint event assigns every track either one gated measurement or a miss,
//! with no measurement used twice. Its weight is
//!
//! ```text
//! ∏_assigned P_D · g_jt  ·  ∏_missed (1 − P_D)  ·  β^(#unassigned measurements)
//! ```
//!
//! where `g_jt` is the Gaussian innovation likelihood and β the clutter
//! density. Marginalizing over events gives β_jt per track, with β_j0 the
//! missed-detection probability. Tracks and measurements are split into
//! gating-connected components and each component is enumerated
//! independently. At β = 0 the weights are taken in the limit β → 0: only
//! events with the fewest unassigned measurements survive.

use log::warn;

use super::ekf::{Linearization, MeasVec};

/// Result of association: `betas[j][0]` is the miss probability of track j
/// and `betas[j][t + 1]` the probability that measurement t is its own.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub betas: Vec<Vec<f64>>,
    /// Set when the enumeration cap was hit and nearest-neighbour was used.
    pub fell_back: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JpdaParams {
    pub p_detection: f64,
    pub clutter_density: f64,
    pub gate_threshold: f64,
    pub event_cap: usize,
}

/// Gated likelihoods: `gated[j]` lists `(measurement, likelihood, d²)`.
pub type Gating = Vec<Vec<(usize, f64, f64)>>;

pub fn gate_all(lins: &[Option<Linearization>], zs: &[MeasVec], threshold: f64) -> Gating {
    lins.iter()
        .map(|lin| match lin {
            None => Vec::new(),
            Some(lin) => zs
                .iter()
                .enumerate()
                .filter_map(|(t, z)| {
                    let d2 = lin.mahalanobis2(z);
                    (d2 <= threshold).then(|| (t, (-0.5 * d2).exp() / ((2.0 * std::f64::consts::PI).powi(3) * lin.s_det).sqrt(), d2))
                })
                .collect(),
        })
        .collect()
}

/// Connected components of the bipartite gating graph, as track index lists.
fn components(gated: &Gating, n_meas: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let n_tracks = gated.len();
    let mut parent: Vec<usize> = (0..n_tracks + n_meas).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for (j, row) in gated.iter().enumerate() {
        for &(t, _, _) in row {
            let (a, b) = (find(&mut parent, j), find(&mut parent, n_tracks + t));
            if a != b {
                parent[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>)> = Default::default();
    for j in 0..n_tracks {
        if gated[j].is_empty() {
            continue;
        }
        let r = find(&mut parent, j);
        groups.entry(r).or_default().0.push(j);
    }
    for t in 0..n_meas {
        let r = find(&mut parent, n_tracks + t);
        if let Some(g) = groups.get_mut(&r) {
            g.1.push(t);
        }
    }
    groups.into_values().collect()
}

struct Enumerator<'a> {
    tracks: &'a [usize],
    gated: &'a Gating,
    log_pd: f64,
    log_miss: f64,
    log_clutter: f64,
    n_meas: usize,
    used: Vec<bool>,
    choice: Vec<Option<(usize, f64)>>,
    events: usize,
    cap: usize,
}

impl Enumerator<'_> {
    /// Visits every joint event as (choices, log weight without clutter, clutter count).
    fn walk(&mut self, depth: usize, log_w: f64, assigned: usize, visit: &mut dyn FnMut(&[Option<(usize, f64)>], f64, usize)) -> bool {
        if depth == self.tracks.len() {
            self.events += 1;
            if self.events > self.cap {
                return false;
            }
            visit(&self.choice, log_w, self.n_meas - assigned);
            return true;
        }
        let j = self.tracks[depth];
        self.choice[depth] = None;
        if !self.walk(depth + 1, log_w + self.log_miss, assigned, visit) {
            return false;
        }
        for k in 0..self.gated[j].len() {
            let (t, g, _) = self.gated[j][k];
            if self.used[t] {
                continue;
            }
            self.used[t] = true;
            self.choice[depth] = Some((t, g));
            let ok = self.walk(depth + 1, log_w + self.log_pd + g.ln(), assigned + 1, visit);
            self.used[t] = false;
            if !ok {
                return false;
            }
        }
        self.choice[depth] = None;
        true
    }
}

/// Marginal association probabilities for every track.
pub fn jpda_associate(gated: &Gating, n_meas: usize, params: &JpdaParams) -> Association {
    let n_tracks = gated.len();
    let mut betas = vec![vec![0.0; n_meas + 1]; n_tracks];
    for row in betas.iter_mut() {
        row[0] = 1.0;
    }
    let mut fell_back = false;
    let pd = params.p_detection;
    for (tracks, meas) in components(gated, n_meas) {
        let mut en = Enumerator {
            tracks: &tracks,
            gated,
            log_pd: pd.ln(),
            log_miss: (1.0 - pd).ln(),
            log_clutter: params.clutter_density.ln(),
            n_meas: meas.len(),
            used: vec![false; n_meas],
            choice: vec![None; tracks.len()],
            events: 0,
            cap: params.event_cap,
        };
        let zero_clutter = params.clutter_density <= 0.0;
        // pass 1: normalizer (max log weight, and fewest clutter when β = 0)
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        let ok = en.walk(0, 0.0, 0, &mut |_, lw, nc| {
            if zero_clutter {
                if nc < best.0 || (nc == best.0 && lw > best.1) {
                    best = (nc, lw);
                }
            } else {
                best.1 = best.1.max(lw + nc as f64 * params.clutter_density.ln());
            }
        });
        if !ok {
            warn!(
                "JPDA event count exceeded cap {} for {} tracks x {} measurements; using nearest neighbour",
                params.event_cap,
                tracks.len(),
                meas.len()
            );
            fell_back = true;
            nearest_neighbour(gated, &tracks, &mut betas);
            continue;
        }
        let log_clutter = en.log_clutter;
        let mut acc = vec![vec![0.0; n_meas + 1]; tracks.len()];
        let mut total = 0.0;
        en.events = 0;
        en.walk(0, 0.0, 0, &mut |choice, lw, nc| {
            let w = if zero_clutter {
                if nc == best.0 {
                    (lw - best.1).exp()
                } else {
                    0.0
                }
            } else {
                (lw + nc as f64 * log_clutter - best.1).exp()
            };
            if w == 0.0 {
                return;
            }
            total += w;
            for (d, c) in choice.iter().enumerate() {
                match c {
                    None => acc[d][0] += w,
                    Some((t, _)) => acc[d][t + 1] += w,
                }
            }
        });
        for (d, &j) in tracks.iter().enumerate() {
            for (b, a) in betas[j].iter_mut().zip(&acc[d]) {
                *b = a / total;
            }
        }
    }
    Association { betas, fell_back }
}

fn nearest_neighbour(gated: &Gating, tracks: &[usize], betas: &mut [Vec<f64>]) {
    let mut taken = std::collections::HashSet::new();
    for &j in tracks {
        let best = gated[j]
            .iter()
            .filter(|(t, _, _)| !taken.contains(t))
            .min_by(|a, b| a.2.total_cmp(&b.2));
        if let Some(&(t, _, _)) = best {
            taken.insert(t);
            betas[j][0] = 0.0;
            betas[j][t + 1] = 1.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta: f64) -> JpdaParams {
        JpdaParams {
            p_detection: 0.9,
            clutter_density: beta,
            gate_threshold: 11.34,
            event_cap: 1_000_000,
        }
    }

    #[test]
    fn no_measurements_means_missed() {
        let gated: Gating = vec![vec![], vec![]];
        let a = jpda_associate(&gated, 0, &params(0.1));
        assert_eq!(a.betas, vec![vec![1.0], vec![1.0]]);
    }

    #[test]
    fn single_pair_closed_form() {
        let l = 3.7;
        let gated: Gating = vec![vec![(0, l, 1.0)]];
        for beta in [0.5, 1.0, 2.0] {
            let a = jpda_associate(&gated, 1, &params(beta));
            let expect = 0.9 * l / (0.9 * l + 0.1 * beta);
            assert!((a.betas[0][1] - expect).abs() < 1e-12);
            assert!((a.betas[0][0] + a.betas[0][1] - 1.0).abs() < 1e-12);
        }
        // β → 0: the measurement must be the track's
        let a = jpda_associate(&gated, 1, &params(0.0));
        assert_eq!(a.betas[0][1], 1.0);
    }

    #[test]
    fn cap_falls_back_to_nearest_neighbour() {
        let gated: Gating = vec![vec![(0, 1.0, 2.0), (1, 1.0, 0.5)], vec![(0, 1.0, 0.1), (1, 1.0, 3.0)]];
        let mut p = params(0.1);
        p.event_cap = 2;
        let a = jpda_associate(&gated, 2, &p);
        assert!(a.fell_back);
        assert_eq!(a.betas[0], vec![0.0, 0.0, 1.0]);
        assert_eq!(a.betas[1], vec![0.0, 1.0, 0.0]);
    }
}
