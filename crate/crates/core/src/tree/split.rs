use super::{TreeKind, TreeParams};
use crate::data::Dataset;

/// Relative tolerance under which two criterion values count as tied.
pub(crate) const TIE_TOLERANCE: f64 = 1e-10;

#[inline]
pub(crate) fn beats(candidate: f64, incumbent: f64) -> bool {
    candidate - incumbent > TIE_TOLERANCE * candidate.abs().max(incumbent.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Criterion value of the two children (larger is better).
    pub score: f64,
    /// `score` minus the criterion value of the unsplit node.
    pub gain: f64,
}

#[derive(Default, Clone, Copy)]
struct Sums {
    n_t: usize,
    n_c: usize,
    s_t: f64,
    s_c: f64,
}

impl Sums {
    #[inline]
    fn add(&mut self, y: f64, treated: bool) {
        if treated {
            self.n_t += 1;
            self.s_t += y;
        } else {
            self.n_c += 1;
            self.s_c += y;
        }
    }

    #[inline]
    fn minus(&self, o: &Sums) -> Sums {
        Sums {
            n_t: self.n_t - o.n_t,
            n_c: self.n_c - o.n_c,
            s_t: self.s_t - o.s_t,
            s_c: self.s_c - o.s_c,
        }
    }

    #[inline]
    fn n(&self) -> usize {
        self.n_t + self.n_c
    }

    #[inline]
    fn tau(&self) -> f64 {
        self.s_t / self.n_t as f64 - self.s_c / self.n_c as f64
    }

    /// `n * tau^2` for causal splitting.
    #[inline]
    fn effect_score(&self) -> f64 {
        let t = self.tau();
        self.n() as f64 * t * t
    }

    /// `S^2 / n` on centred outcomes, the between-child part of the
    /// sum-of-squares decomposition.
    #[inline]
    fn mean_score(&self) -> f64 {
        let s = self.s_t + self.s_c;
        s * s / self.n() as f64
    }
}

/// Exhaustive search for the best split of `rows` over `features`.
///
/// Returns `None` when no feasible split strictly improves on the unsplit
/// node. `scratch` is reused between calls to avoid reallocating.
pub fn best_split(
    data: &Dataset,
    rows: &[usize],
    kind: TreeKind,
    features: &[usize],
    params: &TreeParams,
    scratch: &mut Vec<(f64, usize)>,
) -> Option<SplitCandidate> {
    let m = rows.len();
    if m < 2 * params.min_leaf {
        return None;
    }
    let y = data.y();
    let d = data.d();
    let k = params.min_treat_control_per_leaf;

    // Regression scores use outcomes centred at the node mean so the
    // relative tie tolerance is insensitive to the outcome level.
    let centre = match kind {
        TreeKind::Regression => rows.iter().map(|&i| y[i]).sum::<f64>() / m as f64,
        TreeKind::Causal => 0.0,
    };
    let mut total = Sums::default();
    for &i in rows {
        total.add(y[i] - centre, d[i]);
    }
    let parent = match kind {
        TreeKind::Regression => total.mean_score(),
        TreeKind::Causal => {
            if total.n_t < 2 * k || total.n_c < 2 * k {
                return None;
            }
            total.effect_score()
        }
    };

    let mut best: Option<SplitCandidate> = None;
    let mut sorted_features = features.to_vec();
    sorted_features.sort_unstable();
    for &f in &sorted_features {
        let col = data.column(f);
        scratch.clear();
        scratch.extend(rows.iter().map(|&i| (col[i], i)));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if scratch[0].0 == scratch[m - 1].0 {
            continue;
        }
        let mut left = Sums::default();
        for pos in 1..m {
            let (prev_v, prev_i) = scratch[pos - 1];
            left.add(y[prev_i] - centre, d[prev_i]);
            let v = scratch[pos].0;
            if v == prev_v || pos < params.min_leaf {
                continue;
            }
            if m - pos < params.min_leaf {
                break;
            }
            let right = total.minus(&left);
            let score = match kind {
                TreeKind::Regression => left.mean_score() + right.mean_score(),
                TreeKind::Causal => {
                    if left.n_t < k || left.n_c < k || right.n_t < k || right.n_c < k {
                        continue;
                    }
                    left.effect_score() + right.effect_score()
                }
            };
            if best.is_none_or(|b| beats(score, b.score)) {
                let mut threshold = 0.5 * (prev_v + v);
                if threshold >= v {
                    threshold = prev_v;
                }
                best = Some(SplitCandidate {
                    feature: f,
                    threshold,
                    score,
                    gain: score - parent,
                });
            }
        }
    }
    best.filter(|b| beats(b.score, parent))
}
