//! Rewards on clean data.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::math::dot;

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A user-supplied reward. Without a gradient, central differences are used.
#[derive(Clone)]
pub struct CustomReward {
    pub eval: Arc<EvalFn>,
    pub grad: Option<Arc<GradFn>>,
}

#[derive(Clone)]
pub enum Reward {
    /// `r(z) = lambda . z`.
    Linear(Vec<f64>),
    /// `r(z) = -|z - target|^2 / (2 tau)`.
    Quadratic {
        target: Vec<f64>,
        tau: f64,
    },
    Constant(f64),
    /// `r(z) + c`.
    Shifted(Box<Reward>, f64),
    Custom(CustomReward),
}

impl fmt::Debug for Reward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reward::Linear(l) => f.debug_tuple("Linear").field(l).finish(),
            Reward::Quadratic { target, tau } => f
                .debug_struct("Quadratic")
                .field("target", target)
                .field("tau", tau)
                .finish(),
            Reward::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Reward::Shifted(r, c) => f.debug_tuple("Shifted").field(r).field(c).finish(),
            Reward::Custom(_) => f.write_str("Custom"),
        }
    }
}

const FD_STEP: f64 = 1e-6;

impl Reward {
    pub fn custom<F>(eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Reward::Custom(CustomReward {
            eval: Arc::new(eval),
            grad: None,
        })
    }

    pub fn custom_with_grad<F, G>(eval: F, grad: G) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Reward::Custom(CustomReward {
            eval: Arc::new(eval),
            grad: Some(Arc::new(grad)),
        })
    }

    pub fn shifted(self, c: f64) -> Self {
        Reward::Shifted(Box::new(self), c)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            Reward::Linear(l) => dot(l, z),
            Reward::Quadratic { target, tau } => -crate::math::dist_sq(z, target) / (2.0 * tau),
            Reward::Constant(c) => *c,
            Reward::Shifted(r, c) => r.eval(z) + c,
            Reward::Custom(c) => (c.eval)(z),
        }
    }

    pub fn grad(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Reward::Linear(l) => l.clone(),
            Reward::Quadratic { target, tau } => z.iter().zip(target).map(|(a, b)| -(a - b) / tau).collect(),
            Reward::Constant(_) => alloc::vec![0.0; z.len()],
            Reward::Shifted(r, _) => r.grad(z),
            Reward::Custom(c) => match &c.grad {
                Some(g) => g(z),
                None => central_difference(&*c.eval, z),
            },
        }
    }

    /// The tilt vector when the reward is linear (up to a constant).
    pub fn linear_lambda(&self) -> Option<&[f64]> {
        match self {
            Reward::Linear(l) => Some(l),
            Reward::Shifted(r, _) => r.linear_lambda(),
            _ => None,
        }
    }
}

fn central_difference<F: Fn(&[f64]) -> f64 + ?Sized>(f: &F, z: &[f64]) -> Vec<f64> {
    let mut y = z.to_vec();
    (0..z.len())
        .map(|i| {
            let h = FD_STEP * z[i].abs().max(1.0);
            y[i] = z[i] + h;
            let up = f(&y);
            y[i] = z[i] - h;
            let down = f(&y);
            y[i] = z[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn fd(r: &Reward, z: &[f64]) -> Vec<f64> {
        let f = |y: &[f64]| r.eval(y);
        central_difference(&f, z)
    }

    #[test]
    fn builtin_gradients_match_finite_differences() {
        let z = [0.3, -1.2, 2.0];
        for r in [
            Reward::Linear(vec![1.0, -0.5, 2.0]),
            Reward::Quadratic {
                target: vec![1.0, 0.0, -1.0],
                tau: 0.7,
            },
            Reward::Constant(3.0),
            Reward::Linear(vec![0.2, 0.1, 0.0]).shifted(5.0),
        ] {
            for (a, b) in r.grad(&z).iter().zip(fd(&r, &z)) {
                assert!((a - b).abs() < 1e-6, "{r:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn custom_reward_without_gradient() {
        let r = Reward::custom(|z| z[0] * z[0] * z[1]);
        let g = r.grad(&[1.5, 2.0]);
        assert!((g[0] - 6.0).abs() < 1e-6);
        assert!((g[1] - 2.25).abs() < 1e-6);
    }

    #[test]
    fn values() {
        assert_eq!(Reward::Linear(vec![2.0]).eval(&[3.0]), 6.0);
        let q = Reward::Quadratic {
            target: vec![1.0],
            tau: 0.5,
        };
        assert_eq!(q.eval(&[2.0]), -1.0);
        assert_eq!(Reward::Constant(1.0).shifted(2.0).eval(&[9.0]), 3.0);
        assert_eq!(Reward::Linear(vec![1.0]).shifted(1.0).linear_lambda(), Some(&[1.0][..]));
        assert!(q.linear_lambda().is_none());
    }
}
