//! Synthetic linear-loss graphs: L_t(θ_1, …, θ_t) = Σ_i θ_iᵀ g^t_i.
//!
//! Because every per-step loss is linear in each parameter application, the
//! antithetic difference identity
//! L_t(θ+v_1, …, θ+v_t) − L_t(θ−v_1, …, θ−v_t) = 2 Σ_i v_iᵀ g^t_i
//! holds exactly, which gives the estimators closed-form means and
//! variances. The `{g^t_i}` family is the `LinearLossSpec`; `LinearGraph`
//! realizes it as an `UnrolledGraph`.

use thiserror::Error;

use crate::graph::UnrolledGraph;
use crate::rng::substream;
use crate::scalar::{add_assign, dot, Scalar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinearSpecError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("expected {expected} g-vector rows, found {got}")]
    RowCount { expected: usize, got: usize },
    #[error("horizon and param_dim must be positive")]
    EmptyShape,
    #[error("non-finite g-vector entry at t={t}, i={i}")]
    NonFinite { t: usize, i: usize },
}

/// The lower-triangular vector family {g^t_i ∈ R^d : 1 ≤ i ≤ t ≤ T}.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLossSpec<F: Scalar> {
    horizon: usize,
    param_dim: usize,
    /// `g[t-1][i-1]` is g^t_i.
    g: Vec<Vec<Vec<F>>>,
}

impl<F: Scalar> LinearLossSpec<F> {
    pub fn new(
        horizon: usize,
        param_dim: usize,
        g: Vec<Vec<Vec<F>>>,
    ) -> Result<Self, LinearSpecError> {
        if horizon == 0 || param_dim == 0 {
            return Err(LinearSpecError::EmptyShape);
        }
        let rows: usize = g.iter().map(Vec::len).sum();
        let expected = horizon * (horizon + 1) / 2;
        if g.len() != horizon || rows != expected {
            return Err(LinearSpecError::RowCount {
                expected,
                got: rows,
            });
        }
        for (ti, per_t) in g.iter().enumerate() {
            if per_t.len() != ti + 1 {
                return Err(LinearSpecError::RowCount {
                    expected,
                    got: rows,
                });
            }
            for (ii, vec) in per_t.iter().enumerate() {
                if vec.len() != param_dim {
                    return Err(LinearSpecError::Parse {
                        line: 0,
                        message: format!(
                            "g-vector at t={}, i={} has {} entries, expected {}",
                            ti + 1,
                            ii + 1,
                            vec.len(),
                            param_dim
                        ),
                    });
                }
                if let Some(_) = vec.iter().find(|v| !v.is_finite()) {
                    return Err(LinearSpecError::NonFinite { t: ti + 1, i: ii + 1 });
                }
            }
        }
        Ok(Self {
            horizon,
            param_dim,
            g,
        })
    }

    /// Builds from the nested rows alone, reading T and d off their shape.
    pub fn from_rows(g: Vec<Vec<Vec<F>>>) -> Result<Self, LinearSpecError> {
        let horizon = g.len();
        let param_dim = g.first().and_then(|row| row.first()).map_or(0, Vec::len);
        Self::new(horizon, param_dim, g)
    }

    /// A spec with every g^t_i drawn from the standard normal distribution.
    pub fn random(horizon: usize, param_dim: usize, seed: u64) -> Self {
        let mut rng = substream(seed, 0);
        let g = (1..=horizon)
            .map(|t| {
                (1..=t)
                    .map(|_| (0..param_dim).map(|_| F::standard_normal(&mut rng)).collect())
                    .collect()
            })
            .collect();
        Self::new(horizon, param_dim, g).expect("generated shape is valid")
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    /// g^t_i for 1 ≤ i ≤ t ≤ T.
    pub fn g(&self, t: usize, i: usize) -> &[F] {
        &self.g[t - 1][i - 1]
    }

    /// g^t = Σ_{i=1}^t g^t_i.
    pub fn g_total(&self, t: usize) -> Vec<F> {
        let mut acc = vec![F::zero(); self.param_dim];
        for i in 1..=t {
            add_assign(&mut acc, self.g(t, i));
        }
        acc
    }

    /// Number of noise-sharing windows covering steps 1..=t, ⌈t/k⌉.
    pub fn num_windows(&self, t: usize, k: usize) -> usize {
        t.div_ceil(k)
    }

    /// g^t_{K,j} = Σ_{i=K(j−1)+1}^{min(t, Kj)} g^t_i for j ∈ 1..=⌈t/K⌉;
    /// the last window may be shorter than K.
    pub fn window_sum(&self, t: usize, k: usize, j: usize) -> Vec<F> {
        debug_assert!(j >= 1 && j <= self.num_windows(t, k));
        let lo = k * (j - 1) + 1;
        let hi = t.min(k * j);
        let mut acc = vec![F::zero(); self.param_dim];
        for i in lo..=hi {
            add_assign(&mut acc, self.g(t, i));
        }
        acc
    }

    /// (1/T) Σ_t g^t: the mean of every unbiased estimator on this family.
    pub fn mean_gradient(&self) -> Vec<F> {
        let mut acc = vec![F::zero(); self.param_dim];
        for t in 1..=self.horizon {
            add_assign(&mut acc, &self.g_total(t));
        }
        let scale = F::from_count(self.horizon);
        for v in &mut acc {
            *v = *v / scale;
        }
        acc
    }

    /// Serializes to the flat text format: header `T d`, then one line
    /// `t i g_1 … g_d` per (t, i) pair in row order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{} {}\n", self.horizon, self.param_dim));
        for t in 1..=self.horizon {
            for i in 1..=t {
                out.push_str(&format!("{t} {i}"));
                for v in self.g(t, i) {
                    out.push_str(&format!(" {v}"));
                }
                out.push('\n');
            }
        }
        out
    }

    /// Parses the flat text format, reporting the 1-based line of any
    /// malformed or out-of-order row. Blank lines are ignored.
    pub fn from_text(text: &str) -> Result<Self, LinearSpecError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(idx, l)| (idx + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let (header_line, header) = lines.next().ok_or(LinearSpecError::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let mut parts = header.split_whitespace();
        let horizon: usize = parse_field(parts.next(), header_line, "horizon")?;
        let param_dim: usize = parse_field(parts.next(), header_line, "param_dim")?;
        if parts.next().is_some() {
            return Err(LinearSpecError::Parse {
                line: header_line,
                message: "header must be exactly `T d`".into(),
            });
        }
        if horizon == 0 || param_dim == 0 {
            return Err(LinearSpecError::EmptyShape);
        }

        let mut g: Vec<Vec<Vec<F>>> = (0..horizon).map(|_| Vec::new()).collect();
        let mut expect = (1usize, 1usize);
        let mut rows = 0usize;
        for (line, l) in lines {
            let mut fields = l.split_whitespace();
            let t: usize = parse_field(fields.next(), line, "t")?;
            let i: usize = parse_field(fields.next(), line, "i")?;
            if (t, i) != expect {
                return Err(LinearSpecError::Parse {
                    line,
                    message: format!(
                        "expected row t={} i={}, found t={t} i={i}",
                        expect.0, expect.1
                    ),
                });
            }
            let mut vec = Vec::with_capacity(param_dim);
            for _ in 0..param_dim {
                let field = fields.next().ok_or_else(|| LinearSpecError::Parse {
                    line,
                    message: format!("expected {param_dim} g entries"),
                })?;
                let value = F::parse(field).ok_or_else(|| LinearSpecError::Parse {
                    line,
                    message: format!("unparseable number `{field}`"),
                })?;
                vec.push(value);
            }
            if fields.next().is_some() {
                return Err(LinearSpecError::Parse {
                    line,
                    message: format!("more than {param_dim} g entries"),
                });
            }
            g[t - 1].push(vec);
            rows += 1;
            expect = if i == t { (t + 1, 1) } else { (t, i + 1) };
        }
        let expected = horizon * (horizon + 1) / 2;
        if rows != expected {
            return Err(LinearSpecError::RowCount {
                expected,
                got: rows,
            });
        }
        Self::new(horizon, param_dim, g)
    }
}

fn parse_field<T: std::str::FromStr>(
    field: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, LinearSpecError> {
    let field = field.ok_or_else(|| LinearSpecError::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    field.parse().map_err(|_| LinearSpecError::Parse {
        line,
        message: format!("unparseable {what} `{field}`"),
    })
}

/// `UnrolledGraph` realization of a `LinearLossSpec`.
///
/// The state keeps T running sums; entry t accumulates θ_jᵀ g^t_j as steps
/// j = 1..=t are taken, so after step t the entry equals L_t exactly and
/// `step_loss` just reads it. p = T.
pub struct LinearGraph<F: Scalar> {
    spec: LinearLossSpec<F>,
    s0: Vec<F>,
}

impl<F: Scalar> LinearGraph<F> {
    pub fn new(spec: LinearLossSpec<F>) -> Self {
        let s0 = vec![F::zero(); spec.horizon()];
        Self { spec, s0 }
    }

    pub fn spec(&self) -> &LinearLossSpec<F> {
        &self.spec
    }
}

impl<F: Scalar> UnrolledGraph<F> for LinearGraph<F> {
    fn horizon(&self) -> usize {
        self.spec.horizon()
    }

    fn state_dim(&self) -> usize {
        self.spec.horizon()
    }

    fn param_dim(&self) -> usize {
        self.spec.param_dim()
    }

    fn initial_state(&self) -> &[F] {
        &self.s0
    }

    fn transition_into(&self, t: usize, state: &[F], params: &[F], next: &mut [F]) {
        next.copy_from_slice(state);
        for future in t..=self.spec.horizon() {
            next[future - 1] += dot(params, self.spec.g(future, t));
        }
    }

    fn step_loss(&self, t: usize, state: &[F]) -> F {
        state[t - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> LinearLossSpec<f64> {
        // T=2, d=1: g^1_1 = 1, g^2_1 = 1, g^2_2 = 1.
        LinearLossSpec::new(2, 1, vec![vec![vec![1.0]], vec![vec![1.0], vec![1.0]]]).unwrap()
    }

    #[test]
    fn totals_and_window_sums() {
        let spec = tiny_spec();
        assert_eq!(spec.g_total(2), vec![2.0]);
        assert_eq!(spec.window_sum(2, 1, 1), vec![1.0]);
        assert_eq!(spec.window_sum(2, 1, 2), vec![1.0]);
        assert_eq!(spec.window_sum(2, 2, 1), vec![2.0]);
        assert_eq!(spec.mean_gradient(), vec![1.5]);
    }

    #[test]
    fn text_round_trip_is_identity() {
        let spec = LinearLossSpec::<f64>::random(5, 3, 99);
        let text = spec.to_text();
        let back = LinearLossSpec::<f64>::from_text(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = LinearLossSpec::<f64>::from_text("2 1\n1 1 0.5\n2 2 0.25\n").unwrap_err();
        assert_eq!(
            err,
            LinearSpecError::Parse {
                line: 3,
                message: "expected row t=2 i=1, found t=2 i=2".into()
            }
        );
        let err = LinearLossSpec::<f64>::from_text("2 1\n1 1 abc\n").unwrap_err();
        assert!(matches!(err, LinearSpecError::Parse { line: 2, .. }));
    }

    #[test]
    fn mod_header_shape_errors() {
        assert_eq!(
            LinearLossSpec::<f64>::from_text("0 3\n").unwrap_err(),
            LinearSpecError::EmptyShape
        );
        assert!(matches!(
            LinearLossSpec::<f64>::from_text("2 1\n1 1 0.5\n"),
            Err(LinearSpecError::RowCount {
                expected: 3,
                got: 1
            })
        ));
    }
}
