//! Markov chain over the last two association decisions.
//!
//! States: (1) = [ca, ca], (2) = [ca, fa], (3) = [fa, ca], (4) = [fa, fa],
//! stored 0-based. Each step appends a new decision, false with probability p.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, RowVector4, Vector3, Vector4};

use crate::error::{check_param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssocDtmc {
    p_fa: f64,
}

impl AssocDtmc {
    pub fn new(p_fa: f64) -> Result<Self> {
        check_param("p_fa", p_fa, (0.0..=1.0).contains(&p_fa), "must lie in [0, 1]")?;
        Ok(Self { p_fa })
    }

    pub fn p_fa(&self) -> f64 {
        self.p_fa
    }

    pub fn p_ca(&self) -> f64 {
        1.0 - self.p_fa
    }

    fn require_interior(&self) -> Result<()> {
        if self.p_fa > 0.0 && self.p_fa < 1.0 {
            Ok(())
        } else {
            Err(Error::DegenerateChain(self.p_fa))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainMatrices {
    pub p2: Matrix4<f64>,
    pub p2_absorbing: Matrix4<f64>,
}

pub fn build_chains(d: &AssocDtmc) -> ChainMatrices {
    let p = d.p_fa();
    let q = d.p_ca();
    #[rustfmt::skip]
    let p2 = Matrix4::new(
        q,   p,   0.0, 0.0,
        0.0, 0.0, q,   p,
        q,   p,   0.0, 0.0,
        0.0, 0.0, q,   p,
    );
    let mut p2_absorbing = p2;
    p2_absorbing.set_row(3, &RowVector4::new(0.0, 0.0, 0.0, 1.0));
    ChainMatrices { p2, p2_absorbing }
}

/// Product form ((1−p)², p(1−p), p(1−p), p²).
pub fn stationary(d: &AssocDtmc) -> Result<Vector4<f64>> {
    d.require_interior()?;
    let p = d.p_fa();
    let q = d.p_ca();
    Ok(Vector4::new(q * q, p * q, p * q, p * p))
}

/// Solves πP₂ = π, Σπ = 1 directly (one balance equation replaced by normalisation).
pub fn stationary_balance(d: &AssocDtmc) -> Result<Vector4<f64>> {
    d.require_interior()?;
    let p2 = build_chains(d).p2;
    let mut a = p2.transpose() - Matrix4::identity();
    a.set_row(3, &RowVector4::new(1.0, 1.0, 1.0, 1.0));
    let rhs = Vector4::new(0.0, 0.0, 0.0, 1.0);
    a.lu().solve(&rhs).ok_or(Error::DegenerateChain(d.p_fa()))
}

pub fn chain_power(d: &AssocDtmc, n: u32) -> Matrix4<f64> {
    build_chains(d).p2.pow(n)
}

/// P₂² = V·Wᵀ with V = (1−p)𝟙 and Wᵀ = (1−p, p, p, p²/(1−p)).
pub fn factorization(d: &AssocDtmc) -> Result<(Vector4<f64>, RowVector4<f64>)> {
    if d.p_fa() >= 1.0 {
        return Err(Error::DegenerateChain(d.p_fa()));
    }
    let p = d.p_fa();
    let q = d.p_ca();
    Ok((Vector4::repeat(q), RowVector4::new(q, p, p, p * p / q)))
}

/// m_jj = 1/π_j (state is 0-based).
pub fn mean_intervisit(d: &AssocDtmc, state: usize) -> Result<f64> {
    if state > 3 {
        return Err(Error::IndexOutOfRange { index: state, max: 3 });
    }
    Ok(1.0 / stationary(d)?[state])
}

/// Transient block Q of the absorbing chain.
pub fn transient_block(d: &AssocDtmc) -> Matrix3<f64> {
    build_chains(d).p2_absorbing.fixed_view::<3, 3>(0, 0).into_owned()
}

/// Eigensystem of Q: eigenvalues (0, λ₂, λ₃), right vectors u = (1, (1−p)/λ, 1)
/// and left vectors w = ((1−p)/λ, p/λ, p(1−p)/λ²) for the nonzero pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QEigen {
    pub lambda2: f64,
    pub lambda3: f64,
    pub u2: Vector3<f64>,
    pub u3: Vector3<f64>,
    pub w2: Vector3<f64>,
    pub w3: Vector3<f64>,
}

pub fn q_eigen(d: &AssocDtmc) -> Result<QEigen> {
    d.require_interior()?;
    let p = d.p_fa();
    let q = d.p_ca();
    let disc = (1.0 + 2.0 * p - 3.0 * p * p).sqrt();
    let l2 = 0.5 * (q - disc);
    let l3 = 0.5 * (q + disc);
    let u = |l: f64| Vector3::new(1.0, q / l, 1.0);
    let w = |l: f64| Vector3::new(q / l, p / l, p * q / (l * l));
    Ok(QEigen { lambda2: l2, lambda3: l3, u2: u(l2), u3: u(l3), w2: w(l2), w3: w(l3) })
}

/// Qⁿ = Σⱼ λⱼⁿ uⱼwⱼᵀ/(wⱼᵀuⱼ), n ≥ 1 (the zero eigenvalue drops out).
pub fn q_power_spectral(d: &AssocDtmc, n: u32) -> Result<Matrix3<f64>> {
    if n == 0 {
        return Ok(Matrix3::identity());
    }
    let e = q_eigen(d)?;
    let term = |l: f64, u: &Vector3<f64>, w: &Vector3<f64>| u * w.transpose() * (l.powi(n as i32) / w.dot(u));
    Ok(term(e.lambda2, &e.u2, &e.w2) + term(e.lambda3, &e.u3, &e.w3))
}

/// Qⁿ ≈ λ₂ⁿ û₂û₂ᵀ + λ₃ⁿ û₃û₃ᵀ with û = u/‖u‖, the symmetric reconstruction as stated.
pub fn q_power_symmetric(d: &AssocDtmc, n: u32) -> Result<Matrix3<f64>> {
    let e = q_eigen(d)?;
    let term = |l: f64, u: &Vector3<f64>| {
        let v = u.normalize();
        v * v.transpose() * l.powi(n as i32)
    };
    Ok(term(e.lambda2, &e.u2) + term(e.lambda3, &e.u3))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reach {
    /// 1 − Σⱼ cⱼλⱼⁿ with cⱼ = (wⱼ·𝟙)/(wⱼ·uⱼ).
    pub spectral: f64,
    /// (P̃₂ⁿ)₁₄ by repeated multiplication.
    pub power: f64,
    /// The stated closed form.
    pub stated: f64,
    /// The stated expansion (n+1)p² + p/3.
    pub expansion_stated: f64,
    /// Leading term (n−1)p² of the exact probability (n ≥ 1).
    pub expansion_leading: f64,
}

/// Probability that state (4) is reached within n steps from state (1).
pub fn reach_probability(d: &AssocDtmc, n: u32) -> Result<Reach> {
    if d.p_fa() >= 1.0 {
        return Err(Error::DegenerateChain(d.p_fa()));
    }
    let p = d.p_fa();
    let power = build_chains(d).p2_absorbing.pow(n)[(0, 3)];
    let (spectral, stated) = if p == 0.0 {
        (0.0, f64::NAN)
    } else if n == 0 {
        (0.0, stated_reach(p, 0))
    } else {
        let e = q_eigen(d)?;
        let ones = Vector3::repeat(1.0);
        let c2 = e.w2.dot(&ones) / e.w2.dot(&e.u2);
        let c3 = e.w3.dot(&ones) / e.w3.dot(&e.u3);
        (
            1.0 - c2 * e.lambda2.powi(n as i32) - c3 * e.lambda3.powi(n as i32),
            stated_reach(p, n),
        )
    };
    let nf = n as f64;
    Ok(Reach {
        spectral,
        power,
        stated,
        expansion_stated: (nf + 1.0) * p * p + p / 3.0,
        expansion_leading: if n == 0 { 0.0 } else { (nf - 1.0) * p * p },
    })
}

fn stated_reach(p: f64, n: u32) -> f64 {
    let q = 1.0 - p;
    let disc = (1.0 + 2.0 * p - 3.0 * p * p).sqrt();
    let l2 = 0.5 * (q - disc);
    let l3 = 0.5 * (q + disc);
    let frac = |l: f64| (2.0 * l + q) / (2.0 * l * l + q * q);
    let k = n as i32 + 1;
    1.0 - l2.powi(k) * frac(l2) + l3.powi(k) * frac(l3)
}

/// E(N_a) = X₀ᵀ(Id − Q)⁻¹𝟙 with (Id − Q)⁻¹𝟙 = ((1+p)/p², 1/p², (1+p)/p²).
pub fn expected_transient_visits(d: &AssocDtmc, start: &Vector3<f64>) -> Result<f64> {
    check_start(start)?;
    if d.p_fa() == 0.0 {
        return Err(Error::InfiniteExpectation);
    }
    Ok(start.dot(&visits_vector(d)))
}

pub fn visits_vector(d: &AssocDtmc) -> Vector3<f64> {
    let p = d.p_fa();
    Vector3::new((1.0 + p) / (p * p), 1.0 / (p * p), (1.0 + p) / (p * p))
}

/// The same expectation from the fundamental matrix by a linear solve.
pub fn expected_transient_visits_solve(d: &AssocDtmc, start: &Vector3<f64>) -> Result<f64> {
    check_start(start)?;
    if d.p_fa() == 0.0 {
        return Err(Error::InfiniteExpectation);
    }
    let a = Matrix3::identity() - transient_block(d);
    let x = a.lu().solve(&Vector3::repeat(1.0)).ok_or(Error::InfiniteExpectation)?;
    Ok(start.dot(&x))
}

/// P(N_a = n) = X₀ᵀQ^{n−1}(Id − Q)𝟙, n ≥ 1.
pub fn visits_pmf(d: &AssocDtmc, start: &Vector3<f64>, n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let q = transient_block(d);
    (start.transpose() * q.pow(n - 1) * (Matrix3::identity() - q) * Vector3::repeat(1.0))[(0, 0)]
}

fn check_start(start: &Vector3<f64>) -> Result<()> {
    let ok = start.iter().all(|&x| x >= 0.0) && (start.sum() - 1.0).abs() < 1e-9;
    check_param("start", start.sum(), ok, "start must be a probability vector")
}

/// Chain over the last `k` decisions; state bits are (oldest … newest),
/// index = Σ bit·2^{k−1−pos}; the all-false state is 2^k − 1.
#[derive(Debug, Clone, PartialEq)]
pub struct KWindowChain {
    pub k: usize,
    pub p_fa: f64,
    pub transition: DMatrix<f64>,
}

impl KWindowChain {
    pub fn new(k: usize, p_fa: f64, absorbing: bool) -> Result<Self> {
        if k == 0 || k > 16 {
            return Err(Error::InvalidParameter { name: "k", value: k as f64, reason: "window must be in 1..=16" });
        }
        check_param("p_fa", p_fa, (0.0..=1.0).contains(&p_fa), "must lie in [0, 1]")?;
        let m = 1usize << k;
        let mask = m - 1;
        let mut t = DMatrix::zeros(m, m);
        for s in 0..m {
            if absorbing && s == mask {
                t[(s, s)] = 1.0;
                continue;
            }
            let shifted = (s << 1) & mask;
            t[(s, shifted)] += 1.0 - p_fa;
            t[(s, shifted | 1)] += p_fa;
        }
        Ok(Self { k, p_fa, transition: t })
    }

    pub fn states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn all_false(&self) -> usize {
        self.states() - 1
    }

    pub fn step(&self, state: usize, false_assoc: bool) -> usize {
        if state == self.all_false() && self.transition[(state, state)] == 1.0 {
            return state;
        }
        ((state << 1) & self.all_false()) | false_assoc as usize
    }

    /// Distribution after `n` steps from `start`.
    pub fn evolve(&self, start: usize, n: u32) -> DVector<f64> {
        let mut x = DVector::zeros(self.states());
        x[start] = 1.0;
        let tt = self.transition.transpose();
        for _ in 0..n {
            x = &tt * x;
        }
        x
    }
}
