//! Bhattacharyya similarity between simplex vectors and the two-positive
//! NT-Xent loss built on it, with closed-form gradients.
//!
//! Each anchor `z_ij` (a belief-map pixel) is paired with the two augmented
//! views `y1_ij`, `y2_ij` of its observation. The loss for one anchor is
//!
//! ```text
//! L_ij = -sum_{l in 1,2} log( exp(s(z_ij, y^l_ij)/tau) / sum_{q,k,m} exp(s(z_ij, y^m_qk)/tau) )
//! ```
//!
//! where the denominator runs over every view in the batch (both positives
//! included). The batch loss is the mean of `L_ij` over anchors.

use crate::error::{Error, Result};
use crate::types::{SimplexVec, EPS_CLAMP};

/// Bhattacharyya coefficient `sum_c sqrt(z_c) sqrt(y_c)`.
pub fn bhattacharyya(z: &SimplexVec, y: &SimplexVec) -> Result<f64> {
    if z.len() != y.len() {
        return Err(Error::arg(format!(
            "similarity of vectors with lengths {} and {}",
            z.len(),
            y.len()
        )));
    }
    Ok(bhattacharyya_slice(z.as_slice(), y.as_slice()))
}

#[inline]
pub(crate) fn bhattacharyya_slice(z: &[f64], y: &[f64]) -> f64 {
    z.iter().zip(y).map(|(a, b)| a.sqrt() * b.sqrt()).sum()
}

/// Partial derivatives `(ds/dz, ds/dy)`; entries are clamped at
/// [`EPS_CLAMP`] inside the reciprocal square roots.
pub fn bhattacharyya_grad(z: &SimplexVec, y: &SimplexVec) -> Result<(Vec<f64>, Vec<f64>)> {
    if z.len() != y.len() {
        return Err(Error::arg("gradient of vectors with different lengths"));
    }
    let mut dz = vec![0.0; z.len()];
    let mut dy = vec![0.0; z.len()];
    bhattacharyya_grad_acc(z.as_slice(), y.as_slice(), 1.0, &mut dz, &mut dy);
    Ok((dz, dy))
}

/// Accumulates `w * ds/dz` into `dz` and `w * ds/dy` into `dy`.
#[inline]
pub(crate) fn bhattacharyya_grad_acc(z: &[f64], y: &[f64], w: f64, dz: &mut [f64], dy: &mut [f64]) {
    for c in 0..z.len() {
        let sz = z[c].max(EPS_CLAMP).sqrt();
        let sy = y[c].max(EPS_CLAMP).sqrt();
        dz[c] += w * sy / (2.0 * sz);
        dy[c] += w * sz / (2.0 * sy);
    }
}

/// Cosine similarity; offered for the particle-filter baseline only.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::arg("cosine similarity of vectors with different lengths"));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

/// Anchors and their two positive views, aligned by flat index `i * n + j`.
#[derive(Debug, Clone)]
pub struct LossBatch {
    pub anchors: Vec<SimplexVec>,
    pub views: Vec<[SimplexVec; 2]>,
    pub tau: f64,
}

impl LossBatch {
    pub fn new(anchors: Vec<SimplexVec>, views: Vec<[SimplexVec; 2]>, tau: f64) -> Result<Self> {
        let b = Self { anchors, views, tau };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::arg(format!("temperature must be > 0, got {}", self.tau)));
        }
        if self.anchors.is_empty() || self.anchors.len() != self.views.len() {
            return Err(Error::arg(format!(
                "{} anchors but {} view pairs",
                self.anchors.len(),
                self.views.len()
            )));
        }
        let c = self.anchors[0].len();
        let all_c = self
            .anchors
            .iter()
            .chain(self.views.iter().flatten())
            .all(|v| v.len() == c);
        if !all_c {
            return Err(Error::arg("representation sizes differ within the batch"));
        }
        Ok(())
    }

    fn flat_views(&self) -> Vec<&[f64]> {
        self.views
            .iter()
            .flat_map(|[a, b]| [a.as_slice(), b.as_slice()])
            .collect()
    }
}

/// Gradients of the mean loss w.r.t. every anchor and every view.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub anchors: Vec<Vec<f64>>,
    pub views: Vec<[Vec<f64>; 2]>,
}

/// Mean two-positive NT-Xent loss over the anchors of the batch.
pub fn ntxent_loss(batch: &LossBatch) -> Result<f64> {
    batch.validate()?;
    let anchors: Vec<&[f64]> = batch.anchors.iter().map(|a| a.as_slice()).collect();
    let views = batch.flat_views();
    Ok(ntxent_forward_backward(&anchors, &views, batch.tau, None))
}

/// Mean loss and its exact gradient w.r.t. anchors and views.
pub fn ntxent_grad(batch: &LossBatch) -> Result<LossGrad> {
    batch.validate()?;
    let anchors: Vec<&[f64]> = batch.anchors.iter().map(|a| a.as_slice()).collect();
    let views = batch.flat_views();
    let c = anchors[0].len();
    let mut ga = vec![vec![0.0; c]; anchors.len()];
    let mut gv = vec![vec![0.0; c]; views.len()];
    let loss = ntxent_forward_backward(&anchors, &views, batch.tau, Some((&mut ga, &mut gv)));
    let mut it = gv.into_iter();
    let views = (0..anchors.len())
        .map(|_| [it.next().unwrap(), it.next().unwrap()])
        .collect();
    Ok(LossGrad {
        loss,
        anchors: ga,
        views,
    })
}

/// Gradient accumulators for anchors and views.
pub(crate) type GradSinks<'a> = (&'a mut Vec<Vec<f64>>, &'a mut Vec<Vec<f64>>);

/// Core of the loss. `views` holds `2 * anchors.len()` entries; the
/// positives of anchor `a` are views `2a` and `2a + 1`. When `grads` is
/// given, gradients of the mean loss are accumulated into it.
pub(crate) fn ntxent_forward_backward(
    anchors: &[&[f64]],
    views: &[&[f64]],
    tau: f64,
    mut grads: Option<GradSinks<'_>>,
) -> f64 {
    let na = anchors.len();
    let nv = views.len();
    debug_assert_eq!(nv, 2 * na);
    let inv_a = 1.0 / na as f64;
    let mut logits = vec![0.0; nv];
    let mut total = 0.0;
    for (a, z) in anchors.iter().enumerate() {
        for (l, y) in logits.iter_mut().zip(views) {
            *l = bhattacharyya_slice(z, y) / tau;
        }
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logits.iter().map(|l| (l - m).exp()).sum();
        let lse = m + sum_exp.ln();
        total += 2.0 * lse - logits[2 * a] - logits[2 * a + 1];

        if let Some((ga, gv)) = grads.as_mut() {
            for (v, y) in views.iter().enumerate() {
                let p = (logits[v] - m).exp() / sum_exp;
                let mut d = 2.0 * p;
                if v == 2 * a || v == 2 * a + 1 {
                    d -= 1.0;
                }
                // dL/ds for this (anchor, view) pair
                let w = d * inv_a / tau;
                if w != 0.0 {
                    bhattacharyya_grad_acc(z, y, w, &mut ga[a], &mut gv[v]);
                }
            }
        }
    }
    total * inv_a
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sv(v: &[f64]) -> SimplexVec {
        SimplexVec::new(v.to_vec()).unwrap()
    }

    fn random_simplex(rng: &mut impl Rng, c: usize) -> SimplexVec {
        let v: Vec<f64> = (0..c).map(|_| rng.gen_range(0.05..1.0)).collect();
        SimplexVec::from_unnormalized(v).unwrap()
    }

    #[test]
    fn similarity_fixtures() {
        assert_eq!(bhattacharyya(&sv(&[1.0, 0.0]), &sv(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(bhattacharyya(&sv(&[1.0, 0.0]), &sv(&[0.0, 1.0])).unwrap(), 0.0);
        let s = bhattacharyya(&sv(&[0.25, 0.75]), &sv(&[0.75, 0.25])).unwrap();
        assert!((s - 2.0 * (0.25f64 * 0.75).sqrt()).abs() < 1e-15);
        assert!((s - 0.866_025_403_784_438_6).abs() < 1e-12);
    }

    #[test]
    fn similarity_length_mismatch() {
        assert!(matches!(
            bhattacharyya(&sv(&[1.0]), &sv(&[0.5, 0.5])),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn grad_at_uniform() {
        let (dz, dy) = bhattacharyya_grad(&sv(&[0.5, 0.5]), &sv(&[0.5, 0.5])).unwrap();
        assert_eq!(dz, vec![0.5, 0.5]);
        assert_eq!(dy, vec![0.5, 0.5]);
    }

    #[test]
    fn grad_one_hot_is_finite() {
        let (dz, dy) = bhattacharyya_grad(&sv(&[1.0, 0.0]), &sv(&[1.0, 0.0])).unwrap();
        assert!(dz.iter().chain(&dy).all(|x| x.is_finite()));
    }

    #[test]
    fn grad_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let c = rng.gen_range(2..8);
            let z = random_simplex(&mut rng, c);
            let y = random_simplex(&mut rng, c);
            let (dz, _) = bhattacharyya_grad(&z, &y).unwrap();
            // s is treated as a function on the positive orthant (no simplex
            // projection), matching how the encoder chain uses it.
            for k in 0..c {
                let mut zp = z.as_slice().to_vec();
                let mut zm = zp.clone();
                zp[k] += h;
                zm[k] -= h;
                let fd = (bhattacharyya_slice(&zp, y.as_slice())
                    - bhattacharyya_slice(&zm, y.as_slice()))
                    / (2.0 * h);
                worst = worst.max((fd - dz[k]).abs() / dz[k].abs().max(1e-8));
            }
        }
        assert!(worst <= 1e-5, "max relative error {worst}");
    }

    #[test]
    fn loss_symmetric_two_positive_case() {
        let z = sv(&[0.3, 0.7]);
        let y = sv(&[0.6, 0.4]);
        let b = LossBatch::new(vec![z], vec![[y.clone(), y]], 1.0).unwrap();
        let l = ntxent_loss(&b).unwrap();
        assert!((l - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn loss_closed_form_unequal_positives() {
        let z = sv(&[1.0, 0.0]);
        let b = LossBatch::new(vec![z], vec![[sv(&[1.0, 0.0]), sv(&[0.0, 1.0])]], 1.0).unwrap();
        let l = ntxent_loss(&b).unwrap();
        let e = std::f64::consts::E;
        assert!((l - (2.0 * (1.0 + e).ln() - 1.0)).abs() < 1e-12);
        assert!((l - 1.626_523_3).abs() < 1e-7);
    }

    #[test]
    fn loss_tau_invariant_for_equal_similarities() {
        let u = SimplexVec::uniform(3);
        let mk = |tau| {
            LossBatch::new(
                vec![u.clone(), u.clone()],
                vec![[u.clone(), u.clone()], [u.clone(), u.clone()]],
                tau,
            )
            .unwrap()
        };
        let a = ntxent_loss(&mk(1.0)).unwrap();
        let b = ntxent_loss(&mk(2.0)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn loss_rejects_bad_tau() {
        let u = SimplexVec::uniform(2);
        assert!(LossBatch::new(vec![u.clone()], vec![[u.clone(), u.clone()]], 0.0).is_err());
        let b = LossBatch {
            anchors: vec![u.clone()],
            views: vec![[u.clone(), u]],
            tau: -1.0,
        };
        assert!(matches!(ntxent_loss(&b), Err(Error::Argument(_))));
    }

    #[test]
    fn grad_symmetric_positives_are_equal() {
        let z = sv(&[0.2, 0.8]);
        let y = sv(&[0.5, 0.5]);
        let b = LossBatch::new(vec![z], vec![[y.clone(), y]], 1.0).unwrap();
        let g = ntxent_grad(&b).unwrap();
        assert_eq!(g.views[0][0], g.views[0][1]);
    }

    fn loss_from_flat(anchors: &[Vec<f64>], views: &[Vec<f64>], tau: f64) -> f64 {
        let a: Vec<&[f64]> = anchors.iter().map(|v| v.as_slice()).collect();
        let v: Vec<&[f64]> = views.iter().map(|v| v.as_slice()).collect();
        ntxent_forward_backward(&a, &v, tau, None)
    }

    #[test]
    fn loss_grad_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (b, n, c) = (2, 3, 5);
        let anchors: Vec<SimplexVec> = (0..b * n).map(|_| random_simplex(&mut rng, c)).collect();
        let views: Vec<[SimplexVec; 2]> = (0..b * n)
            .map(|_| [random_simplex(&mut rng, c), random_simplex(&mut rng, c)])
            .collect();
        let batch = LossBatch::new(anchors, views, 0.7).unwrap();
        let g = ntxent_grad(&batch).unwrap();

        let mut fa: Vec<Vec<f64>> = batch.anchors.iter().map(|a| a.as_slice().to_vec()).collect();
        let mut fv: Vec<Vec<f64>> = batch
            .views
            .iter()
            .flat_map(|[p, q]| [p.as_slice().to_vec(), q.as_slice().to_vec()])
            .collect();
        let h = 1e-6;
        let mut worst = 0.0f64;
        for a in 0..fa.len() {
            for k in 0..c {
                let x = fa[a][k];
                fa[a][k] = x + h;
                let lp = loss_from_flat(&fa, &fv, batch.tau);
                fa[a][k] = x - h;
                let lm = loss_from_flat(&fa, &fv, batch.tau);
                fa[a][k] = x;
                let fd = (lp - lm) / (2.0 * h);
                let an = g.anchors[a][k];
                worst = worst.max((fd - an).abs() / an.abs().max(1e-6));
            }
        }
        for v in 0..fv.len() {
            for k in 0..c {
                let x = fv[v][k];
                fv[v][k] = x + h;
                let lp = loss_from_flat(&fa, &fv, batch.tau);
                fv[v][k] = x - h;
                let lm = loss_from_flat(&fa, &fv, batch.tau);
                fv[v][k] = x;
                let fd = (lp - lm) / (2.0 * h);
                let an = g.views[v / 2][v % 2][k];
                worst = worst.max((fd - an).abs() / an.abs().max(1e-6));
            }
        }
        assert!(worst <= 1e-5, "max relative error {worst}");
    }

    #[test]
    fn grad_wrt_foreign_view_is_zero() {
        // Two independent batches: perturbing the views of the second one has
        // no effect on the loss or gradient of the first.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mk = |rng: &mut ChaCha8Rng| {
            let anchors: Vec<SimplexVec> = (0..2).map(|_| random_simplex(rng, 3)).collect();
            let views: Vec<[SimplexVec; 2]> = (0..2)
                .map(|_| [random_simplex(rng, 3), random_simplex(rng, 3)])
                .collect();
            LossBatch::new(anchors, views, 1.0).unwrap()
        };
        let first = mk(&mut rng);
        let g_before = ntxent_grad(&first).unwrap();
        let mut second = mk(&mut rng);
        second.views[0][0] = random_simplex(&mut rng, 3);
        let _ = ntxent_grad(&second).unwrap();
        assert_eq!(ntxent_grad(&first).unwrap(), g_before);
    }

    #[test]
    fn loss_lower_bound_by_enumeration() {
        // Brute force over coarse simplex grids for b*n <= 3: the loss never
        // reaches -2 ln 2 and is nonnegative whenever negatives exist.
        let grid: Vec<SimplexVec> = (0..=4)
            .map(|i| sv(&[i as f64 / 4.0, 1.0 - i as f64 / 4.0]))
            .collect();
        let mut min_single = f64::INFINITY;
        for z in &grid {
            for y1 in &grid {
                for y2 in &grid {
                    let b = LossBatch::new(vec![z.clone()], vec![[y1.clone(), y2.clone()]], 1.0)
                        .unwrap();
                    min_single = min_single.min(ntxent_loss(&b).unwrap());
                }
            }
        }
        assert!(min_single > -2.0 * std::f64::consts::LN_2);
        for z0 in &grid {
            for z1 in &grid {
                for ya in &grid {
                    for yb in &grid {
                        let b = LossBatch::new(
                            vec![z0.clone(), z1.clone()],
                            vec![[ya.clone(), ya.clone()], [yb.clone(), z1.clone()]],
                            1.0,
                        )
                        .unwrap();
                        assert!(ntxent_loss(&b).unwrap() >= 0.0);
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn similarity_bounded_and_symmetric(
            a in proptest::collection::vec(0.0f64..1.0, 4),
            b in proptest::collection::vec(0.0f64..1.0, 4),
        ) {
            prop_assume!(a.iter().sum::<f64>() > 1e-6 && b.iter().sum::<f64>() > 1e-6);
            let z = SimplexVec::from_unnormalized(a).unwrap();
            let y = SimplexVec::from_unnormalized(b).unwrap();
            let s = bhattacharyya(&z, &y).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
            prop_assert_eq!(s, bhattacharyya(&y, &z).unwrap());
            prop_assert!((bhattacharyya(&z, &z).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
