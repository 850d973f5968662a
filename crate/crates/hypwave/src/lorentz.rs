//! Lorentz quasi-norms L^(p,q) on H^n via decreasing rearrangement.
//!
//! A radial profile on a quadrature grid is a simple function for the discrete
//! measure sum_i w_i delta_{r_i}, so its distribution function and decreasing
//! rearrangement are exact step functions. All norms here integrate those
//! steps in closed form:
//!     q < inf:  ||f||^q = sum_k v_k^q (p/q) (s_k^{q/p} - s_{k-1}^{q/p}),
//!     q = inf:  ||f||   = max_k s_k^{1/p} v_k,
//! where v_k is the k-th distinct value of |f| in decreasing order and s_k the
//! measure of {|f| >= v_k}. In particular the (p,p) norm reproduces the L^p
//! quadrature sum exactly (regroup the atoms), and indicator norms hit the
//! closed form (p/q)^{1/q} V^{1/p} to the accuracy of the quadrature volume V.
//!
//! Divergence guard: on a truncated grid a norm is only trustworthy when the
//! integrand w_i |f_i|^p has stopped growing at r_max. We compare the
//! contribution of the outermost block of nodes against the block before it
//! and flag growth, rather than thresholding the raw tail value, so spectrally
//! reconstructed profiles with harmless round-trip noise at r_max still pass.

use crate::error::{Error, Result};
use crate::geometry::RadialProfile;

/// Exponent pair (p, q) with 1 < p <= inf, 1 <= q <= inf, and q = inf
/// whenever p = inf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzExponents {
    p: f64,
    q: f64,
}

impl LorentzExponents {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        let ok = p > 1.0
            && q >= 1.0
            && !p.is_nan()
            && !q.is_nan()
            && (p.is_finite() || q.is_infinite());
        if !ok {
            return Err(Error::InvalidExponents { p, q });
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// mu{ |f| > height } for the discrete hyperbolic measure carried by the grid.
/// Total and monotone nonincreasing in the height; heights <= 0 return the
/// measure of the support of |f| augmented by the zero set above the height.
pub fn distribution_function(f: &RadialProfile, height: f64) -> f64 {
    let w = f.grid().weights();
    f.values()
        .iter()
        .zip(w)
        .filter(|(v, _)| v.abs() > height)
        .map(|(_, w)| w)
        .sum()
}

/// Decreasing rearrangement of a profile as an exact step function.
///
/// `s[k]` is the measure of { |f| >= v[k] } (strictly increasing), `v[k]` the
/// distinct nonzero values of |f| in strictly decreasing order; f*(s) = v[k]
/// on (s[k-1], s[k]] and 0 beyond s[last].
#[derive(Debug, Clone)]
pub struct RearrangementTable {
    s: Vec<f64>,
    v: Vec<f64>,
}

impl RearrangementTable {
    pub fn levels(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    /// f*(s); f*(0) is the essential sup.
    pub fn value_at(&self, s: f64) -> f64 {
        if self.v.is_empty() {
            return 0.0;
        }
        if s <= 0.0 {
            return self.v[0];
        }
        // First k with s <= s[k].
        let k = self.s.partition_point(|&sk| sk < s);
        if k < self.v.len() {
            self.v[k]
        } else {
            0.0
        }
    }

    /// Distribution function of the rearrangement itself: measure of
    /// { f* > height }. Equals the source profile's distribution function
    /// exactly, including at tie heights.
    pub fn measure_above(&self, height: f64) -> f64 {
        let k = self.v.partition_point(|&vk| vk > height);
        if k == 0 {
            0.0
        } else {
            self.s[k - 1]
        }
    }
}

pub fn decreasing_rearrangement(f: &RadialProfile) -> RearrangementTable {
    let mut atoms: Vec<(f64, f64)> = f
        .values()
        .iter()
        .zip(f.grid().weights())
        .filter(|(v, _)| **v != 0.0)
        .map(|(v, w)| (v.abs(), *w))
        .collect();
    atoms.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite values"));
    let mut s = Vec::new();
    let mut v = Vec::new();
    let mut acc = 0.0;
    for (value, weight) in atoms {
        acc += weight;
        if v.last() == Some(&value) {
            *s.last_mut().expect("nonempty with last value") = acc;
        } else {
            v.push(value);
            s.push(acc);
        }
    }
    RearrangementTable { s, v }
}

/// Flags profiles whose norm integrand is still growing at the edge of the
/// grid. Compares the outermost tenth of the nodes against the tenth before
/// it; growth plus a non-negligible share of the total means truncation
/// dominates and the norm on the ambient (infinite-volume) space diverges or
/// is unresolved.
fn tail_divergence(f: &RadialProfile, p: f64) -> Option<f64> {
    if !p.is_finite() {
        return None;
    }
    let vals = f.values();
    let w = f.grid().weights();
    let n = vals.len();
    let block = (n / 10).max(2);
    if n < 3 * block {
        return None;
    }
    let piece = |lo: usize, hi: usize| -> f64 {
        (lo..hi).map(|i| w[i] * vals[i].abs().powf(p)).sum()
    };
    let total = piece(0, n);
    if total == 0.0 {
        return None;
    }
    let outer = piece(n - block, n);
    let inner = piece(n - 2 * block, n - block);
    let share = outer / total;
    // A profile whose integrand genuinely grows against the volume weight
    // parks at least ~10% of its mass in the outer block (the marginal case,
    // a flat integrand, gives exactly the block's width share). Truncation
    // ringing of resolved profiles sits orders of magnitude below that, so
    // 1e-3 separates the two regimes with a wide margin on both sides.
    if outer > inner && share > 1e-3 {
        Some(share)
    } else {
        None
    }
}

/// Lorentz quasi-norm ||f||_{(p,q)}.
pub fn lorentz_norm(f: &RadialProfile, e: LorentzExponents) -> Result<f64> {
    let (p, q) = (e.p, e.q);
    if p.is_infinite() {
        return Ok(f.sup_norm());
    }
    if let Some(tail) = tail_divergence(f, p) {
        return Err(Error::DivergentNorm { tail });
    }
    let table = decreasing_rearrangement(f);
    if table.v.is_empty() {
        return Ok(0.0);
    }
    if q.is_infinite() {
        // sup_s s^{1/p} f*(s); the sup over each piece sits at its right
        // endpoint because f* is constant there and s^{1/p} increases.
        let mut best = 0.0f64;
        for k in 0..table.v.len() {
            best = best.max(table.s[k].powf(1.0 / p) * table.v[k]);
        }
        return Ok(best);
    }
    let mut sum = 0.0;
    let mut prev = 0.0f64;
    for k in 0..table.v.len() {
        let sk = table.s[k].powf(q / p);
        sum += table.v[k].powf(q) * (p / q) * (sk - prev);
        prev = sk;
    }
    Ok(sum.powf(1.0 / q))
}

/// Measured data for one Holder product check.
#[derive(Debug, Clone, Copy)]
pub struct HolderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// ||f g||_{e3} versus ||f||_{e1} ||g||_{e2} under the exponent relations
/// 1/p3 = 1/p1 + 1/p2 and 1/q1 + 1/q2 >= 1/q3. Only the measured ratio is
/// returned; no fixed constant is asserted.
pub fn holder_check(
    f: &RadialProfile,
    g: &RadialProfile,
    e1: LorentzExponents,
    e2: LorentzExponents,
    e3: LorentzExponents,
) -> Result<HolderReport> {
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    if (inv(e3.p) - inv(e1.p) - inv(e2.p)).abs() > 1e-12 {
        return Err(Error::ConstraintViolation(format!(
            "Holder exponents: 1/{} != 1/{} + 1/{}",
            e3.p, e1.p, e2.p
        )));
    }
    if inv(e1.q) + inv(e2.q) + 1e-12 < inv(e3.q) {
        return Err(Error::ConstraintViolation(format!(
            "Holder second exponents: 1/{} + 1/{} < 1/{}",
            e1.q, e2.q, e3.q
        )));
    }
    let lhs = lorentz_norm(&f.mul(g)?, e3)?;
    let nf = lorentz_norm(f, e1)?;
    let ng = lorentz_norm(g, e2)?;
    let rhs = nf * ng;
    let ratio = if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    };
    Ok(HolderReport { lhs, rhs, ratio })
}

/// One link of the inclusion chain: the (p, q_outer) norm against the
/// (p, q_inner) norm with q_inner < q_outer, together with the sharp
/// rearrangement-norm constant (q_inner/p)^(1/q_inner - 1/q_outer).
#[derive(Debug, Clone, Copy)]
pub struct InclusionLink {
    pub q_inner: f64,
    pub q_outer: f64,
    pub norm_inner: f64,
    pub norm_outer: f64,
    pub ratio: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct InclusionReport {
    pub p: f64,
    pub links: Vec<InclusionLink>,
    pub ok: bool,
}

/// Verifies the chain L^(p,1) in L^(p,q1) in L^p in L^(p,q2) in L^(p,inf) on
/// one profile: each outer norm is bounded by the sharp constant times the
/// next inner norm. Requires 1 <= q1 <= p <= q2 <= inf.
pub fn inclusion_check(
    f: &RadialProfile,
    p: f64,
    q1: f64,
    q2: f64,
) -> Result<InclusionReport> {
    if !(1.0 <= q1 && q1 <= p && p <= q2) || q1.is_nan() || q2.is_nan() {
        return Err(Error::ConstraintViolation(format!(
            "inclusion exponents need 1 <= q1 <= p <= q2, got q1 = {q1}, p = {p}, q2 = {q2}"
        )));
    }
    let mut qs = vec![1.0, q1, p, q2, f64::INFINITY];
    qs.dedup_by(|a, b| a == b);
    let norms: Vec<f64> = qs
        .iter()
        .map(|&q| lorentz_norm(f, LorentzExponents::new(p, q)?))
        .collect::<Result<_>>()?;
    let mut links = Vec::new();
    let mut ok = true;
    for k in 1..qs.len() {
        let (qa, qb) = (qs[k - 1], qs[k]);
        let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
        let bound = (qa / p).powf(inv(qa) - inv(qb));
        let ratio = if norms[k - 1] == 0.0 {
            if norms[k] == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            norms[k] / norms[k - 1]
        };
        ok &= ratio <= bound * (1.0 + 1e-9);
        links.push(InclusionLink {
            q_inner: qa,
            q_outer: qb,
            norm_inner: norms[k - 1],
            norm_outer: norms[k],
            ratio,
            bound,
        });
    }
    Ok(InclusionReport { p, links, ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ball_volume, HyperbolicSpace, RadialGrid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    /// Panel width 1 so radii 1 and 2 are panel boundaries; level sets of the
    /// test profiles then align with quadrature panels and level-set volumes
    /// are spectrally accurate.
    fn grid() -> Arc<RadialGrid> {
        let space = HyperbolicSpace::new(3).unwrap();
        RadialGrid::gauss_legendre(space, 8.0, 8, 12).unwrap()
    }

    fn indicator(g: &Arc<RadialGrid>, radius: f64) -> RadialProfile {
        RadialProfile::from_fn(g, |r| if r < radius { 1.0 } else { 0.0 })
    }

    #[test]
    fn exponent_validation() {
        assert!(LorentzExponents::new(2.0, 1.0).is_ok());
        assert!(LorentzExponents::new(2.0, f64::INFINITY).is_ok());
        assert!(LorentzExponents::new(f64::INFINITY, f64::INFINITY).is_ok());
        for (p, q) in [(1.0, 2.0), (0.5, 1.0), (2.0, 0.9), (f64::INFINITY, 2.0)] {
            assert!(
                matches!(LorentzExponents::new(p, q), Err(Error::InvalidExponents { .. })),
                "({p}, {q}) should be rejected"
            );
        }
    }

    #[test]
    fn distribution_of_indicator() {
        let g = grid();
        let f = indicator(&g, 1.0);
        let v = ball_volume(3, 1.0).unwrap();
        let mu = distribution_function(&f, 0.5);
        assert!(
            ((mu - v) / v).abs() < 1e-12,
            "level set of indicator is the ball: {mu} vs {v}"
        );
        assert_eq!(distribution_function(&f, 1.5), 0.0, "above the max");
    }

    #[test]
    fn distribution_of_exponential_profile() {
        // |e^{-r}| > e^{-1} exactly on the unit ball.
        let g = grid();
        let f = RadialProfile::from_fn(&g, |r| (-r).exp());
        let mu = distribution_function(&f, (-1.0f64).exp());
        let v = ball_volume(3, 1.0).unwrap();
        assert!(((mu - v) / v).abs() < 1e-12, "mu = {mu} vs V(3,1) = {v}");
        assert!((mu - 5.1110).abs() < 1e-3, "headline value 5.1110, got {mu}");
    }

    #[test]
    fn rearrangement_of_indicator_is_single_step() {
        let g = grid();
        let t = decreasing_rearrangement(&indicator(&g, 1.0));
        let v = ball_volume(3, 1.0).unwrap();
        assert_eq!(t.values(), &[1.0]);
        assert_eq!(t.levels().len(), 1);
        assert!(((t.levels()[0] - v) / v).abs() < 1e-12);
        assert_eq!(t.value_at(0.5 * v), 1.0);
        assert_eq!(t.value_at(1.5 * v), 0.0);
    }

    #[test]
    fn rearrangement_fixes_monotone_profiles() {
        // For nonincreasing radial f the rearrangement is f itself read along
        // the cumulative measure: f*(mu(B_{r_i})) = f(r_i) atom by atom.
        let g = grid();
        let f = RadialProfile::from_fn(&g, |r| (-r).exp());
        let t = decreasing_rearrangement(&f);
        let mut acc = 0.0;
        for (i, (&r, &w)) in g.nodes().iter().zip(g.weights()).enumerate() {
            acc += w;
            let got = t.value_at(acc);
            let want = (-r).exp();
            assert!(
                ((got - want) / want).abs() < 1e-13,
                "atom {i}: f*({acc}) = {got} vs f({r}) = {want}"
            );
        }
    }

    #[test]
    fn rearrangement_sees_absolute_value() {
        let g = grid();
        let f = RadialProfile::from_fn(&g, |r| (-r).exp() * (3.0 * r).cos());
        let fa = RadialProfile::from_fn(&g, |r| ((-r).exp() * (3.0 * r).cos()).abs());
        let tf = decreasing_rearrangement(&f);
        let ta = decreasing_rearrangement(&fa);
        assert_eq!(tf.values(), ta.values());
        assert_eq!(tf.levels(), ta.levels());
    }

    #[test]
    fn table_is_monotone_and_equimeasurable() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = RadialProfile::from_values(&g, vals).unwrap();
        let t = decreasing_rearrangement(&f);
        for k in 1..t.values().len() {
            assert!(t.values()[k] < t.values()[k - 1], "v strictly decreasing");
            assert!(t.levels()[k] > t.levels()[k - 1], "s strictly increasing");
        }
        let top = f.sup_norm();
        for k in 0..50 {
            let h = top * 1e-6f64.powf(1.0 - k as f64 / 49.0);
            let direct = distribution_function(&f, h);
            let via_table = t.measure_above(h);
            assert!(
                (direct - via_table).abs() <= 1e-12 * direct.max(1.0),
                "height {h}: {direct} vs {via_table}"
            );
        }
    }

    #[test]
    fn indicator_norms_match_closed_forms() {
        // ||1_{B_R}||_{(p,q)} = (p/q)^{1/q} V^{1/p}, V = ball volume.
        let g = grid();
        let f = indicator(&g, 1.0);
        let v = ball_volume(3, 1.0).unwrap();
        let cases = [
            (3.7, f64::INFINITY, v.powf(1.0 / 3.7)),
            (3.7, 3.7, v.powf(1.0 / 3.7)),
            (2.5, 1.0, 2.5 * v.powf(1.0 / 2.5)),
            (3.0, 2.0, 1.5f64.sqrt() * v.powf(1.0 / 3.0)),
        ];
        for (p, q, want) in cases {
            let got = lorentz_norm(&f, LorentzExponents::new(p, q).unwrap()).unwrap();
            assert!(
                ((got - want) / want).abs() < 1e-10,
                "(p, q) = ({p}, {q}): {got} vs {want}"
            );
        }
        let weak = lorentz_norm(&f, LorentzExponents::new(3.7, f64::INFINITY).unwrap()).unwrap();
        assert!((weak - 1.5541270891915635).abs() < 1e-10, "frozen V^(1/3.7), got {weak}");
        assert!((weak - 1.554).abs() < 2e-3, "headline 1.554");
    }

    #[test]
    fn q_equals_p_reproduces_lp_quadrature() {
        let g = grid();
        let profiles: Vec<RadialProfile> = vec![
            RadialProfile::from_fn(&g, |r| (-r * r).exp()),
            RadialProfile::from_fn(&g, |r| (-2.0 * r).exp() * (1.0 + r)),
            RadialProfile::from_fn(&g, |r| r * (-1.5 * r).exp()),
        ];
        for (i, f) in profiles.iter().enumerate() {
            for p in [2.2, 3.0, 3.7] {
                let lp: f64 = f
                    .values()
                    .iter()
                    .zip(g.weights())
                    .map(|(v, w)| w * v.abs().powf(p))
                    .sum::<f64>()
                    .powf(1.0 / p);
                let got = lorentz_norm(f, LorentzExponents::new(p, p).unwrap()).unwrap();
                assert!(
                    ((got - lp) / lp).abs() < 1e-12,
                    "profile {i}, p = {p}: (p,p) = {got} vs L^p = {lp}"
                );
            }
        }
    }

    #[test]
    fn weak_norm_equals_sup_height_formulation() {
        let g = grid();
        let f = RadialProfile::from_fn(&g, |r| (-r * r).exp() * (1.0 + (2.0 * r).sin().abs()));
        let p = 2.8;
        let norm = lorentz_norm(&f, LorentzExponents::new(p, f64::INFINITY).unwrap()).unwrap();
        let t = decreasing_rearrangement(&f);
        let mut sup = 0.0f64;
        for &h in t.values() {
            let hh = h * (1.0 - 1e-13);
            sup = sup.max(hh * distribution_function(&f, hh).powf(1.0 / p));
        }
        assert!(
            ((norm - sup) / norm).abs() < 1e-10,
            "weak norm {norm} vs sup-height formulation {sup}"
        );
        assert!(sup <= norm * (1.0 + 1e-12), "sampled sup never exceeds the norm");
    }

    #[test]
    fn sup_exponents_give_sup_norm() {
        let g = grid();
        let f = RadialProfile::from_fn(&g, |r| (-r).exp() * (1.0 + r * r));
        let e = LorentzExponents::new(f64::INFINITY, f64::INFINITY).unwrap();
        assert_eq!(lorentz_norm(&f, e).unwrap(), f.sup_norm());
    }

    #[test]
    fn zero_profile_has_zero_norm() {
        let g = grid();
        let z = RadialProfile::zeros(&g);
        for (p, q) in [(2.0, 2.0), (3.7, 1.0), (2.5, f64::INFINITY)] {
            assert_eq!(lorentz_norm(&z, LorentzExponents::new(p, q).unwrap()).unwrap(), 0.0);
        }
    }

    #[test]
    fn divergence_flag_fires_on_growth_only() {
        let g = grid();
        // Constant profile: integrand grows like sinh^2, flagged.
        let c = RadialProfile::from_fn(&g, |_| 1.0);
        assert!(matches!(
            lorentz_norm(&c, LorentzExponents::new(2.0, 2.0).unwrap()),
            Err(Error::DivergentNorm { .. })
        ));
        // e^{-r} with p = 1.5: integrand e^{(2 - 1.5) r} grows, flagged.
        let f = RadialProfile::from_fn(&g, |r| (-r).exp());
        assert!(matches!(
            lorentz_norm(&f, LorentzExponents::new(1.5, 1.5).unwrap()),
            Err(Error::DivergentNorm { .. })
        ));
        // Same profile with p = 3.7: integrand decays e^{-1.7 r}, accepted.
        let ok = lorentz_norm(&f, LorentzExponents::new(3.7, 3.7).unwrap());
        assert!(ok.is_ok(), "decaying integrand must not be flagged: {ok:?}");
    }

    #[test]
    fn holder_with_unit_factor_is_exact() {
        let g = grid();
        let f = RadialProfile::from_fn(&g, |r| (-r * r).exp());
        let one = RadialProfile::from_fn(&g, |_| 1.0);
        let e1 = LorentzExponents::new(2.5, 2.0).unwrap();
        let e2 = LorentzExponents::new(f64::INFINITY, f64::INFINITY).unwrap();
        let rep = holder_check(&f, &one, e1, e2, e1).unwrap();
        assert!(
            (rep.ratio - 1.0).abs() < 1e-12,
            "g = 1 with (inf, inf): ratio {}",
            rep.ratio
        );
    }

    #[test]
    fn holder_indicator_closed_form() {
        let g = grid();
        let f = indicator(&g, 1.0);
        let e1 = LorentzExponents::new(3.0, 2.0).unwrap();
        let e2 = LorentzExponents::new(6.0, 3.0).unwrap();
        let e3 = LorentzExponents::new(2.0, 2.0).unwrap();
        let rep = holder_check(&f, &f, e1, e2, e3).unwrap();
        // (p3/q3)^{1/q3} / ((p1/q1)^{1/q1} (p2/q2)^{1/q2}); V powers cancel
        // because 1/p3 = 1/p1 + 1/p2.
        let want = 0.6480537657465553;
        assert!(
            ((rep.ratio - want) / want).abs() < 1e-10,
            "indicator ratio {} vs closed form {want}",
            rep.ratio
        );
    }

    #[test]
    fn holder_rejects_bad_exponent_relations() {
        let g = grid();
        let f = indicator(&g, 1.0);
        let e1 = LorentzExponents::new(3.0, 2.0).unwrap();
        let e2 = LorentzExponents::new(6.0, 3.0).unwrap();
        let bad_p = LorentzExponents::new(2.5, 2.0).unwrap();
        assert!(matches!(
            holder_check(&f, &f, e1, e2, bad_p),
            Err(Error::ConstraintViolation(_))
        ));
        let bad_q = LorentzExponents::new(2.0, 1.0).unwrap();
        assert!(matches!(
            holder_check(&f, &f, e1, e2, bad_q),
            Err(Error::ConstraintViolation(_))
        ));
    }

    fn random_smooth(g: &Arc<RadialGrid>, rng: &mut ChaCha8Rng) -> RadialProfile {
        let mut terms = Vec::new();
        for _ in 0..3 {
            let a: f64 = rng.gen_range(0.5..2.0);
            let c: f64 = rng.gen_range(0.0..2.0);
            let amp: f64 = rng.gen_range(-1.0..1.0);
            terms.push((a, c, amp));
        }
        RadialProfile::from_fn(g, |r| {
            terms
                .iter()
                .map(|(a, c, amp)| amp * (-a * (r - c) * (r - c)).exp())
                .sum()
        })
    }

    #[test]
    fn holder_ratio_stable_under_refinement() {
        let space = HyperbolicSpace::new(3).unwrap();
        let coarse = RadialGrid::gauss_legendre(space, 8.0, 8, 12).unwrap();
        let fine = RadialGrid::gauss_legendre(space, 8.0, 16, 12).unwrap();
        let e1 = LorentzExponents::new(3.0, 2.0).unwrap();
        let e2 = LorentzExponents::new(6.0, 3.0).unwrap();
        let e3 = LorentzExponents::new(2.0, 2.0).unwrap();
        let mut max_c = 0.0f64;
        let mut max_f = 0.0f64;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fc = random_smooth(&coarse, &mut rng);
            let gc = random_smooth(&coarse, &mut rng);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ff = random_smooth(&fine, &mut rng);
            let gf = random_smooth(&fine, &mut rng);
            let rc = holder_check(&fc, &gc, e1, e2, e3).unwrap().ratio;
            let rf = holder_check(&ff, &gf, e1, e2, e3).unwrap().ratio;
            assert!(rc.is_finite() && rf.is_finite());
            max_c = max_c.max(rc);
            max_f = max_f.max(rf);
        }
        assert!(
            ((max_c - max_f) / max_f).abs() < 0.05,
            "max Holder ratio drifts under refinement: {max_c} vs {max_f}"
        );
    }

    #[test]
    fn inclusion_chain_on_indicator_and_random_family() {
        let g = grid();
        let f = indicator(&g, 1.0);
        let rep = inclusion_check(&f, 3.0, 2.0, 5.0).unwrap();
        assert!(rep.ok, "indicator chain: {:#?}", rep.links);
        // (p,1) norm dominates everything raw: p V^{1/p} is the largest.
        let first = rep.links.first().unwrap();
        assert!(first.norm_inner > first.norm_outer);

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for k in 0..50 {
            let f = random_smooth(&g, &mut rng);
            let rep = inclusion_check(&f, 3.0, 1.5, 7.0).unwrap();
            assert!(rep.ok, "sample {k} violates a sharp inclusion link: {:#?}", rep.links);
        }
    }

    #[test]
    fn inclusion_rejects_bad_exponents() {
        let g = grid();
        let f = indicator(&g, 1.0);
        assert!(inclusion_check(&f, 3.0, 4.0, 5.0).is_err(), "q1 > p");
        assert!(inclusion_check(&f, 3.0, 0.5, 5.0).is_err(), "q1 < 1");
        assert!(inclusion_check(&f, 3.0, 2.0, 2.5).is_err(), "q2 < p");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn scaling_homogeneity(seed in 0u64..1000, a in -50.0f64..50.0) {
            prop_assume!(a.abs() > 1e-6);
            let g = grid();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_smooth(&g, &mut rng);
            for (p, q) in [(2.5, 1.0), (3.7, 2.0), (2.0, f64::INFINITY), (4.0, 4.0)] {
                let e = LorentzExponents::new(p, q).unwrap();
                let base = lorentz_norm(&f, e).unwrap();
                let scaled = lorentz_norm(&f.scale(a), e).unwrap();
                let want = a.abs() * base;
                prop_assert!(
                    (scaled - want).abs() <= 1e-12 * want.max(1e-300),
                    "(p,q)=({},{}) a={}: {} vs {}", p, q, a, scaled, want
                );
            }
        }

        #[test]
        fn rearrangement_invariants_hold(seed in 0u64..1000) {
            let g = grid();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_smooth(&g, &mut rng);
            let t = decreasing_rearrangement(&f);
            for k in 1..t.values().len() {
                prop_assert!(t.values()[k] < t.values()[k - 1]);
                prop_assert!(t.levels()[k] > t.levels()[k - 1]);
            }
            // Equimeasurability at a random height.
            let h = rng.gen_range(0.0..f.sup_norm());
            let d = distribution_function(&f, h);
            prop_assert!((d - t.measure_above(h)).abs() <= 1e-12 * d.max(1.0));
        }
    }
}
