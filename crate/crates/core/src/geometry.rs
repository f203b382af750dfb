//! Constructors for every array family, each tagged with the claims its
//! construction guarantees.
//!
//! Coincident sensors from different subarrays are merged; `claims.raw_count`
//! keeps the pre-merge total. Claimed minimum spacings are informational,
//! measured spacing comes from [`crate::coarray::weight_tau`].

use serde::{Deserialize, Serialize};

use crate::coarray::{symmetric_difference_2q, ArrayGeometry, Claims};
use crate::error::{Error, Result};
use crate::numtheory::gcd_u;

fn require_coprime(a: i64, b: i64) -> Result<()> {
    if a <= 0 || b <= 0 || gcd_u(a as u64, b as u64) != 1 {
        return Err(Error::NotCoprime(a, b));
    }
    Ok(())
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}

/// Two interleaved ULAs: `{M2·m : m ∈ [1, M1−1]} ∪ {M1·m : m ∈ [0, 2M2−1]}`.
pub fn coprime_array(m1: i64, m2: i64) -> Result<ArrayGeometry> {
    require(m1 >= 2 && m2 >= 2, || {
        format!("co-prime rates must be >= 2, got ({m1}, {m2})")
    })?;
    require_coprime(m1, m2)?;
    let sub1 = (1..m1).map(|m| m * m2).collect();
    let sub2 = (0..2 * m2).map(|m| m * m1).collect();
    let g = ArrayGeometry::from_subarrays(format!("coprime({m1},{m2})"), vec![sub1, sub2])?;
    let claims = Claims {
        family: Some("coprime".into()),
        order: Some(2),
        consecutive_radius: Some(m1 * m2 - 1),
        sensor_count: Some((m1 + 2 * m2 - 1) as usize),
        min_spacing: Some("d".into()),
        ..g.claims.clone()
    };
    Ok(g.with_claims(claims))
}

/// `{n1·N2 + δ1 : n1 ∈ [0, N1]} ∪ {n2 + δ2 : n2 ∈ [0, N2]}`.
pub fn shifted_nested(n1: i64, n2: i64, delta1: i64, delta2: i64) -> Result<ArrayGeometry> {
    require(n1 >= 1 && n2 >= 1, || {
        format!("N1, N2 must be >= 1, got ({n1}, {n2})")
    })?;
    let sparse = (0..=n1).map(|i| i * n2 + delta1).collect();
    let dense = (0..=n2).map(|i| i + delta2).collect();
    let g = ArrayGeometry::from_subarrays(
        format!("shifted_nested({n1},{n2},{delta1},{delta2})"),
        vec![sparse, dense],
    )?;
    let claims = Claims {
        family: Some("shifted_nested".into()),
        order: Some(2),
        notes: vec![format!(
            "cross difference S1 - S2 covers [{}, {}]",
            delta1 - delta2,
            n1 * n2 + delta1 - delta2
        )],
        ..g.claims.clone()
    };
    Ok(g.with_claims(claims))
}

/// Standard two-level nested array: `shifted_nested(N1, N2, N2, 0)`.
pub fn nested_array(n1: i64, n2: i64) -> Result<ArrayGeometry> {
    let mut g = shifted_nested(n1, n2, n2, 0)?;
    g.label = format!("nested({n1},{n2})");
    g.claims.family = Some("nested".into());
    g.claims.consecutive_radius = Some((n1 + 1) * n2);
    g.claims.min_spacing = Some("d".into());
    Ok(g)
}

/// `{(n1 + δ1)·M1 : n1 ∈ [0, N1]} ∪ {(n2 + δ2)·M2 : n2 ∈ [0, N2]}`.
pub fn shifted_coprime(
    m1: i64,
    m2: i64,
    n1: i64,
    n2: i64,
    delta1: i64,
    delta2: i64,
) -> Result<ArrayGeometry> {
    require_coprime(m1, m2)?;
    require(n1 >= 0 && n2 >= 0, || {
        format!("N1, N2 must be >= 0, got ({n1}, {n2})")
    })?;
    let s1 = (0..=n1).map(|i| (i + delta1) * m1).collect();
    let s2 = (0..=n2).map(|i| (i + delta2) * m2).collect();
    let g = ArrayGeometry::from_subarrays(
        format!("shifted_coprime({m1},{m2},{n1},{n2},{delta1},{delta2})"),
        vec![s1, s2],
    )?;
    let claims = Claims {
        family: Some("shifted_coprime".into()),
        order: Some(2),
        ..g.claims.clone()
    };
    Ok(g.with_claims(claims))
}

/// Extended co-prime pair `{n1·M1 : n1 ∈ [0, N1]}` and
/// `{n2·M2 : n2 ∈ [⌊−M1/2⌋, ⌊M1/2⌋]}` with `N1 ≥ M2`; their cross
/// difference covers `|μ| ≤ (N1+1)M1 − ⌊M1/2⌋M2`.
pub fn extended_coprime(m1: i64, m2: i64, n1: i64) -> Result<ArrayGeometry> {
    require_coprime(m1, m2)?;
    require(n1 >= m2, || format!("need N1 >= M2, got N1={n1}, M2={m2}"))?;
    let s1 = (0..=n1).map(|i| i * m1).collect();
    let s2 = ((-m1).div_euclid(2)..=m1.div_euclid(2))
        .map(|i| i * m2)
        .collect();
    let g =
        ArrayGeometry::from_subarrays(format!("extended_coprime({m1},{m2},{n1})"), vec![s1, s2])?;
    let claims = Claims {
        family: Some("extended_coprime".into()),
        order: Some(2),
        consecutive_radius: Some((n1 + 1) * m1 - m1.div_euclid(2) * m2),
        ..g.claims.clone()
    };
    Ok(g.with_claims(claims))
}

/// Third-order Diophantine array with `M1 = p3·p1`, `M2 = p3·p2`,
/// `M3 = p1·p2`: sub-ULAs `m1·M1, m1 ∈ [0, 2p2−1]`, `m2·M2, m2 ∈ [0, p1−1]`,
/// `m3·M3, m3 ∈ [0, p3−1]`. Its signed set `±(p_a − p_b + p_c)` covers
/// `[−(p1p2p3−1), p1p2p3−1]`.
pub fn dio3_array(p1: i64, p2: i64, p3: i64) -> Result<ArrayGeometry> {
    require(p1 >= 2 && p2 >= 2 && p3 >= 2, || {
        format!("p1, p2, p3 must be >= 2, got ({p1}, {p2}, {p3})")
    })?;
    require_coprime(p1, p2)?;
    require_coprime(p1, p3)?;
    require_coprime(p2, p3)?;
    let (m1, m2, m3) = (p3 * p1, p3 * p2, p1 * p2);
    let subs = vec![
        (0..2 * p2).map(|m| m * m1).collect(),
        (0..p1).map(|m| m * m2).collect(),
        (0..p3).map(|m| m * m3).collect(),
    ];
    let g = ArrayGeometry::from_subarrays(format!("dio3({p1},{p2},{p3})"), subs)?;
    let claims = Claims {
        family: Some("dio3".into()),
        order: Some(3),
        consecutive_radius: Some(p1 * p2 * p3 - 1),
        sensor_count: Some((p1 + 2 * p2 + p3 - 2) as usize),
        min_spacing: Some("N*lambda/12 (asymptotic)".into()),
        ..g.claims.clone()
    };
    Ok(g.with_claims(claims))
}

/// Parameters of the third-order array, kept for lag-table caching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dio3Params {
    pub p1: i64,
    pub p2: i64,
    pub p3: i64,
}

impl Dio3Params {
    pub fn build(&self) -> Result<ArrayGeometry> {
        dio3_array(self.p1, self.p2, self.p3)
    }

    pub fn guaranteed_radius(&self) -> i64 {
        self.p1 * self.p2 * self.p3 - 1
    }
}

/// `⌊5M1M2/2⌋`, minus `M2` when `M2` is odd.
pub fn fourth_order_radius(m1: i64, m2: i64) -> i64 {
    let base = (5 * m1 * m2).div_euclid(2);
    if m2 % 2 == 0 {
        base
    } else {
        base - m2
    }
}

/// `⌊17M1M2/2⌋`.
pub fn sixth_order_radius(m1: i64, m2: i64) -> i64 {
    (17 * m1 * m2).div_euclid(2)
}

/// Fourth-order shifted array built from four shifted nested subarrays.
pub fn fourth_order_array(n: [i64; 4], m1: i64, m2: i64) -> Result<ArrayGeometry> {
    let [n1, n2, n3, n4] = n;
    require(n.iter().all(|&v| v >= 1), || {
        format!("N1..N4 must be >= 1, got {n:?}")
    })?;
    require(m1 >= 1 && m2 >= 1, || {
        format!("M1, M2 must be >= 1, got ({m1}, {m2})")
    })?;
    require_coprime(m1, m2)?;
    require(m1 <= n1 * n2, || {
        format!("violated bound M1 <= N1*N2 ({m1} > {})", n1 * n2)
    })?;
    require(m2 <= n3 * n4, || {
        format!("violated bound M2 <= N3*N4 ({m2} > {})", n3 * n4)
    })?;
    let h1 = m1.div_euclid(2);
    let h2 = m2.div_euclid(2);
    let subs = vec![
        (0..=n1).map(|i| (i * n2 + m2) * m1).collect(),
        (0..=n2).map(|i| (i + h2) * m1).collect(),
        (0..=n3).map(|i| (i * n4 - h1) * m2).collect(),
        (0..=n4).map(|i| (i - h1) * m2).collect(),
    ];
    let g = ArrayGeometry::from_subarrays(
        format!("fourth_order({n1},{n2},{n3},{n4},{m1},{m2})"),
        subs,
    )?;
    let claims = Claims {
        family: Some("fourth_order".into()),
        order: Some(4),
        consecutive_radius: Some(fourth_order_radius(m1, m2)),
        min_spacing: Some("Theta(N^2) d".into()),
        notes: vec!["M_max^4 = floor(5*M1*M2/2), minus M2 when M2 is odd".into()],
        ..g.claims.clone()
    };
    Ok(g.with_claims(claims))
}

/// Sixth-order shifted array built from six shifted subarrays.
pub fn sixth_order_array(n: [i64; 6], m1: i64, m2: i64) -> Result<ArrayGeometry> {
    let [n1, n2, n3, n4, n5, n6] = n;
    require(n.iter().all(|&v| v >= 1), || {
        format!("N1..N6 must be >= 1, got {n:?}")
    })?;
    require(m1 >= 1 && m2 >= 1, || {
        format!("M1, M2 must be >= 1, got ({m1}, {m2})")
    })?;
    require_coprime(m1, m2)?;
    require(m1 <= n1 * n2 * n3, || {
        format!("violated bound M1 <= N1*N2*N3 ({m1} > {})", n1 * n2 * n3)
    })?;
    require(m2 < n4 * n5 * n6, || {
        format!("violated bound M2 < N4*N5*N6 ({m2} >= {})", n4 * n5 * n6)
    })?;
    let subs = vec![
        (0..=n1).map(|i| i * n2 * n3 * m1).collect(),
        (0..=n2).map(|i| (i * n3 + m2) * m1).collect(),
        (0..=n3)
            .map(|i| (i + (3 * m2).div_euclid(2)) * m1)
            .collect(),
        (0..=n4)
            .map(|i| (i * n5 * n6 - (5 * m1).div_euclid(2)) * m2)
            .collect(),
        (0..=n5)
            .map(|i| (i * n6 - (7 * m1).div_euclid(2)) * m2)
            .collect(),
        (0..=n6).map(|i| (i - 5 * m1) * m2).collect(),
    ];
    let g = ArrayGeometry::from_subarrays(
        format!("sixth_order({n1},{n2},{n3},{n4},{n5},{n6},{m1},{m2})"),
        subs,
    )?;
    let claims = Claims {
        family: Some("sixth_order".into()),
        order: Some(6),
        consecutive_radius: Some(sixth_order_radius(m1, m2)),
        min_spacing: Some("Theta(N^3) d".into()),
        notes: vec!["M_max^6 = floor(17*M1*M2/2)".into()],
        ..g.claims.clone()
    };
    Ok(g.with_claims(claims))
}

/// Measured consecutive radius of the repeat-allowed 2q-th symmetric set.
pub fn measured_radius(s: &ArrayGeometry, q: u32) -> Result<i64> {
    Ok(symmetric_difference_2q(s, q, true)?.consecutive_radius as i64)
}

/// Layers two arrays: `S1 ∪ {2·μ1·β : β ∈ S2}`.
///
/// Both coverage preconditions are checked with the co-array oracle. The
/// result's `2(q1+q2)`-th order set covers `[−(2μ1μ2+μ1), 2μ1μ2+μ1]`.
pub fn layer(
    s1: &ArrayGeometry,
    q1: u32,
    mu1: i64,
    s2: &ArrayGeometry,
    q2: u32,
    mu2: i64,
) -> Result<ArrayGeometry> {
    require(q1 >= 1 && q2 >= 1, || "layer orders must be >= 1".into())?;
    require(mu1 >= 0 && mu2 >= 0, || {
        "coverage radii must be >= 0".into()
    })?;
    for (s, q, mu, name) in [(s1, q1, mu1, "S1"), (s2, q2, mu2, "S2")] {
        let got = measured_radius(s, q)?;
        if got < mu {
            return Err(Error::Domain(format!(
                "{name} covers only [-{got}, {got}] at order {}, need radius {mu}",
                2 * q
            )));
        }
    }
    Ok(layer_unchecked(s1, q1, mu1, s2, q2, mu2))
}

fn layer_unchecked(
    s1: &ArrayGeometry,
    q1: u32,
    mu1: i64,
    s2: &ArrayGeometry,
    q2: u32,
    mu2: i64,
) -> ArrayGeometry {
    let scaled: Vec<i64> = s2.positions().iter().map(|b| 2 * mu1 * b).collect();
    let mut g = ArrayGeometry::from_subarrays(
        format!("layer[{} | {}]", s1.label, s2.label),
        vec![s1.positions().to_vec(), scaled],
    )
    .expect("both inputs are nonempty");
    g.claims.family = Some("layered_2q".into());
    g.claims.order = Some(2 * (q1 + q2));
    g.claims.consecutive_radius = Some(2 * mu1 * mu2 + mu1);
    g
}

/// Layered 2q-th order array with uniform subarray size `block`.
///
/// Sixth-order blocks (`N_i = block`, `M1 = block³`, `M2 = block³ − 1`) are
/// stacked while the remaining order is a multiple of 6; a fourth-order
/// block (`M1 = block²`, `M2 = block² − 1`) or a nested block
/// (`N1 = N2 = block`) absorbs a remainder of 4 or 2. Each block's radius
/// is measured with the oracle before chaining.
pub fn build_2q_array(q: u32, block: i64) -> Result<ArrayGeometry> {
    require(q >= 2, || {
        format!("layered construction needs q >= 2, got {q}")
    })?;
    require(block >= 2, || {
        format!("block size must be >= 2 for co-prime (M1, M2), got {block}")
    })?;
    let order = 2 * q;
    let mut blocks: Vec<(ArrayGeometry, u32)> = Vec::new();
    let sixth = |b: i64| sixth_order_array([b; 6], b * b * b, b * b * b - 1);
    for _ in 0..order / 6 {
        blocks.push((sixth(block)?, 3));
    }
    match order % 6 {
        4 => blocks.push((
            fourth_order_array([block; 4], block * block, block * block - 1)?,
            2,
        )),
        2 => blocks.push((nested_array(block, block)?, 1)),
        _ => {}
    }
    let mut iter = blocks.into_iter();
    let (mut acc, mut acc_q) = iter.next().expect("q >= 2 yields a block");
    let mut acc_mu = measured_radius(&acc, acc_q)?;
    for (b, bq) in iter {
        let mu = measured_radius(&b, bq)?;
        acc = layer_unchecked(&acc, acc_q, acc_mu, &b, bq, mu);
        acc_mu = 2 * acc_mu * mu + acc_mu;
        acc_q += bq;
    }
    acc.label = format!("layered_2q(q={q},block={block})");
    acc.claims.family = Some("layered_2q".into());
    acc.claims.order = Some(order);
    acc.claims.consecutive_radius = Some(acc_mu);
    acc.claims.dof_order = Some(
        match order % 6 {
            0 => "O(17^(q/3) (N/2q)^(2q))",
            2 => "O(2 * 17^((q-1)/3) (N/2q)^(2q))",
            _ => "O(5 * 17^((q-2)/3) (N/2q)^(2q))",
        }
        .into(),
    );
    Ok(acc)
}

/// Family selector plus integer parameters, as accepted by the CLI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ConstructionParams {
    Coprime {
        m1: i64,
        m2: i64,
    },
    Nested {
        n1: i64,
        n2: i64,
    },
    ShiftedNested {
        n1: i64,
        n2: i64,
        delta1: i64,
        delta2: i64,
    },
    ShiftedCoprime {
        m1: i64,
        m2: i64,
        n1: i64,
        n2: i64,
        delta1: i64,
        delta2: i64,
    },
    ExtendedCoprime {
        m1: i64,
        m2: i64,
        n1: i64,
    },
    Dio3 {
        p1: i64,
        p2: i64,
        p3: i64,
    },
    FourthOrder {
        n: [i64; 4],
        m1: i64,
        m2: i64,
    },
    SixthOrder {
        n: [i64; 6],
        m1: i64,
        m2: i64,
    },
    Layered2q {
        q: u32,
        block: i64,
    },
}

impl ConstructionParams {
    /// Parses a family name and its integer arguments in documented order.
    pub fn parse(family: &str, args: &[i64]) -> Result<Self> {
        let want = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "family {family} takes {n} integer arguments, got {}",
                    args.len()
                )))
            }
        };
        let a = args;
        Ok(match family {
            "coprime" => {
                want(2)?;
                Self::Coprime { m1: a[0], m2: a[1] }
            }
            "nested" => {
                want(2)?;
                Self::Nested { n1: a[0], n2: a[1] }
            }
            "shifted_nested" => {
                want(4)?;
                Self::ShiftedNested {
                    n1: a[0],
                    n2: a[1],
                    delta1: a[2],
                    delta2: a[3],
                }
            }
            "shifted_coprime" => {
                want(6)?;
                Self::ShiftedCoprime {
                    m1: a[0],
                    m2: a[1],
                    n1: a[2],
                    n2: a[3],
                    delta1: a[4],
                    delta2: a[5],
                }
            }
            "extended_coprime" => {
                want(3)?;
                Self::ExtendedCoprime {
                    m1: a[0],
                    m2: a[1],
                    n1: a[2],
                }
            }
            "dio3" => {
                want(3)?;
                Self::Dio3 {
                    p1: a[0],
                    p2: a[1],
                    p3: a[2],
                }
            }
            "fourth_order" => {
                want(6)?;
                Self::FourthOrder {
                    n: [a[0], a[1], a[2], a[3]],
                    m1: a[4],
                    m2: a[5],
                }
            }
            "sixth_order" => {
                want(8)?;
                Self::SixthOrder {
                    n: [a[0], a[1], a[2], a[3], a[4], a[5]],
                    m1: a[6],
                    m2: a[7],
                }
            }
            "layered_2q" => {
                want(2)?;
                if a[0] < 0 || a[0] > u32::MAX as i64 {
                    return Err(Error::domain("q out of range"));
                }
                Self::Layered2q {
                    q: a[0] as u32,
                    block: a[1],
                }
            }
            other => return Err(Error::Domain(format!("unknown array family '{other}'"))),
        })
    }

    pub fn build(&self) -> Result<ArrayGeometry> {
        match *self {
            Self::Coprime { m1, m2 } => coprime_array(m1, m2),
            Self::Nested { n1, n2 } => nested_array(n1, n2),
            Self::ShiftedNested {
                n1,
                n2,
                delta1,
                delta2,
            } => shifted_nested(n1, n2, delta1, delta2),
            Self::ShiftedCoprime {
                m1,
                m2,
                n1,
                n2,
                delta1,
                delta2,
            } => shifted_coprime(m1, m2, n1, n2, delta1, delta2),
            Self::ExtendedCoprime { m1, m2, n1 } => extended_coprime(m1, m2, n1),
            Self::Dio3 { p1, p2, p3 } => dio3_array(p1, p2, p3),
            Self::FourthOrder { n, m1, m2 } => fourth_order_array(n, m1, m2),
            Self::SixthOrder { n, m1, m2 } => sixth_order_array(n, m1, m2),
            Self::Layered2q { q, block } => build_2q_array(q, block),
        }
    }
}
