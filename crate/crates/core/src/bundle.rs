//! Cutting-plane model of the objective.
//!
//! A [`Bundle`] stores linearizations `l_i(x) = <g_i, x> + b_i` of the objective
//! collected at trial points, and evaluates their pointwise maximum. Cuts are
//! kept in `(g, b)` form with `b = f(z) - <g, z>`, which is all the proximal QP
//! and the model evaluation need.

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dot};

/// One linearization of the objective, generated at `point`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    point: Vec<f64>,
    fvalue: f64,
    subgrad: Vec<f64>,
    const_term: f64,
}

impl Cut {
    pub fn new(point: Vec<f64>, fvalue: f64, subgrad: Vec<f64>) -> Result<Self> {
        if point.len() != subgrad.len() {
            return Err(Error::DimensionMismatch {
                expected: point.len(),
                got: subgrad.len(),
            });
        }
        if !fvalue.is_finite() || !all_finite(&point) || !all_finite(&subgrad) {
            return Err(Error::NonFinite("cut data"));
        }
        let const_term = fvalue - dot(&subgrad, &point);
        Ok(Self {
            point,
            fvalue,
            subgrad,
            const_term,
        })
    }

    /// Affine piece `<subgrad, x> + const_term`, anchored at the origin.
    pub fn affine(subgrad: Vec<f64>, const_term: f64) -> Result<Self> {
        let point = vec![0.0; subgrad.len()];
        Self::new(point, const_term, subgrad)
    }

    pub fn dimension(&self) -> usize {
        self.subgrad.len()
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn fvalue(&self) -> f64 {
        self.fvalue
    }

    pub fn subgrad(&self) -> &[f64] {
        &self.subgrad
    }

    pub fn const_term(&self) -> f64 {
        self.const_term
    }

    /// Value of the linearization at `x`.
    #[inline]
    pub fn value_at(&self, x: &[f64]) -> f64 {
        dot(&self.subgrad, x) + self.const_term
    }

    /// Convex combination of cuts. Weights must be nonnegative and sum to one.
    fn combine<'c>(parts: impl IntoIterator<Item = (f64, &'c Cut)>, n: usize) -> Cut {
        let mut point = vec![0.0; n];
        let mut subgrad = vec![0.0; n];
        let mut const_term = 0.0;
        for (w, cut) in parts {
            for i in 0..n {
                point[i] += w * cut.point[i];
                subgrad[i] += w * cut.subgrad[i];
            }
            const_term += w * cut.const_term;
        }
        let fvalue = dot(&subgrad, &point) + const_term;
        Cut {
            point,
            fvalue,
            subgrad,
            const_term,
        }
    }
}

/// Ordered collection of cuts plus an optional aggregate cut.
///
/// Iteration order (and hence the index used for tie-breaking and for QP
/// weights) is: stored cuts in insertion order, then the aggregate.
#[derive(Debug, Clone)]
pub struct Bundle {
    dimension: usize,
    cuts: Vec<Cut>,
    aggregate: Option<Cut>,
    capacity: Option<usize>,
    // Simplex weights of the last QP solve. `cut_weights` covers a prefix of
    // `cuts`; cuts added after that solve have no weight yet.
    cut_weights: Vec<f64>,
    agg_weight: f64,
}

impl Bundle {
    /// Unbounded bundle.
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            cuts: Vec::new(),
            aggregate: None,
            capacity: None,
            cut_weights: Vec::new(),
            agg_weight: 0.0,
        }
    }

    /// Bundle holding at most `capacity` plain cuts (plus the aggregate).
    pub fn with_capacity(dimension: usize, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("bundle capacity must be positive".into()));
        }
        let mut b = Self::new(dimension);
        b.capacity = Some(capacity);
        Ok(b)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    /// Number of pieces in the model, aggregate included.
    pub fn len(&self) -> usize {
        self.cuts.len() + self.aggregate.is_some() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn aggregate(&self) -> Option<&Cut> {
        self.aggregate.as_ref()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cut> + '_ {
        self.cuts.iter().chain(self.aggregate.iter())
    }

    pub fn clear(&mut self) {
        self.cuts.clear();
        self.aggregate = None;
        self.cut_weights.clear();
        self.agg_weight = 0.0;
    }

    /// A stored (non-aggregate) cut generated exactly at `x`, if any.
    pub fn cut_at(&self, x: &[f64]) -> Option<&Cut> {
        self.cuts.iter().rev().find(|c| c.point == x)
    }

    /// Adds a cut, compacting first when the bundle is full.
    pub fn add_cut(&mut self, cut: Cut) -> Result<()> {
        if cut.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: cut.dimension(),
            });
        }
        if let Some(cap) = self.capacity {
            if self.cuts.len() + 1 > cap {
                self.compact(cap - 1);
            }
        }
        self.cuts.push(cut);
        Ok(())
    }

    /// Records the simplex weights of a QP solve on this bundle, in `iter()`
    /// order.
    pub fn record_weights(&mut self, weights: &[f64]) {
        debug_assert_eq!(weights.len(), self.len());
        let nc = self.cuts.len();
        self.cut_weights.clear();
        self.cut_weights.extend_from_slice(&weights[..nc]);
        self.agg_weight = weights.get(nc).copied().unwrap_or(0.0);
    }

    /// Last recorded weights in `iter()` order, with zeros for cuts added
    /// since. `None` when no solve has been recorded.
    pub fn warm_weights(&self) -> Option<Vec<f64>> {
        if self.cut_weights.is_empty() && self.agg_weight == 0.0 {
            return None;
        }
        let mut w = self.cut_weights.clone();
        w.resize(self.cuts.len(), 0.0);
        if self.aggregate.is_some() {
            w.push(self.agg_weight);
        }
        Some(w)
    }

    /// Drops zero-weight cuts, then folds the oldest remaining cuts into the
    /// aggregate until at most `keep` plain cuts are left.
    fn compact(&mut self, keep: usize) {
        let n = self.dimension;
        let known = self.cut_weights.len();
        let mut kept: Vec<(Cut, Option<f64>)> = self
            .cuts
            .drain(..)
            .enumerate()
            .map(|(i, c)| (c, (i < known).then(|| self.cut_weights[i])))
            .filter(|(_, w)| !w.is_some_and(|w| w <= 0.0))
            .collect();

        if kept.len() > keep {
            let folded: Vec<(Cut, Option<f64>)> = kept.drain(..kept.len() - keep).collect();
            let mut parts: Vec<(f64, &Cut)> =
                folded.iter().map(|(c, w)| (w.unwrap_or(0.0), c)).collect();
            if let Some(agg) = self.aggregate.as_ref() {
                parts.push((self.agg_weight, agg));
            }
            let total: f64 = parts.iter().map(|(w, _)| w).sum();
            if total > 0.0 {
                parts.iter_mut().for_each(|(w, _)| *w /= total);
            } else {
                let u = 1.0 / parts.len() as f64;
                parts.iter_mut().for_each(|(w, _)| *w = u);
            }
            self.aggregate = Some(Cut::combine(parts, n));
            self.agg_weight = total;
        }

        // weights of kept cuts stay valid up to the first unknown one
        self.cut_weights = kept.iter().map_while(|(_, w)| *w).collect();
        self.cuts = kept.into_iter().map(|(c, _)| c).collect();
    }

    /// Index and value of the maximal piece at `x`; ties go to the lowest index.
    pub fn argmax_at(&self, x: &[f64]) -> Result<(usize, f64)> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, cut) in self.iter().enumerate() {
            let v = cut.value_at(x);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.ok_or(Error::EmptyBundle)
    }

    /// The cutting-plane model `max_i <g_i, x> + b_i`.
    pub fn evaluate_model(&self, x: &[f64]) -> Result<f64> {
        self.argmax_at(x).map(|(_, v)| v)
    }

    /// `fx - model(x)`, the linearization error of the model at `x`.
    pub fn model_gap(&self, x: &[f64], fx: f64) -> Result<f64> {
        Ok(fx - self.evaluate_model(x)?)
    }
}
