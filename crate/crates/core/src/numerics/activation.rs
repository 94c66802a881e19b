use super::Real;

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Relu => {
                if x > T::ZERO {
                    x
                } else {
                    T::ZERO
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => {
                if x >= T::ZERO {
                    T::ONE / (T::ONE + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (T::ONE + e)
                }
            }
        }
    }

    /// Derivative at input `x` given output `y = apply(x)`. Relu'(0) = 0.
    #[inline]
    pub fn derivative<T: Real>(self, x: T, y: T) -> T {
        match self {
            Activation::Identity => T::ONE,
            Activation::Relu => {
                if x > T::ZERO {
                    T::ONE
                } else {
                    T::ZERO
                }
            }
            Activation::Tanh => T::ONE - y * y,
            Activation::Sigmoid => y * (T::ONE - y),
        }
    }

    pub fn apply_slice<T: Real>(self, xs: &[T]) -> Vec<T> {
        xs.iter().map(|&x| self.apply(x)).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "identity" => Activation::Identity,
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            "sigmoid" => Activation::Sigmoid,
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_values() {
        assert_eq!(Activation::Relu.apply(-2.0f32), 0.0);
        assert_eq!(Activation::Relu.apply(3.0f32), 3.0);
        assert_eq!(Activation::Sigmoid.apply(0.0f64), 0.5);
        // 1 / (1 + e^-2)
        assert!((Activation::Sigmoid.apply(2.0f64) - 0.880_797_077_977_882_4).abs() < 1e-12);
        assert!((Activation::Sigmoid.apply(2.0f32) - 0.8808).abs() < 1e-4);
        assert_eq!(Activation::Relu.derivative(0.0f64, 0.0), 0.0);
        assert!(Activation::Sigmoid.apply(-800.0f64) >= 0.0);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for act in [Activation::Identity, Activation::Relu, Activation::Tanh, Activation::Sigmoid] {
            for i in -40..=40 {
                let x = i as f64 * 0.1 + 0.05; // stays off the relu kink
                let numeric = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                let analytic = act.derivative(x, act.apply(x));
                assert!((numeric - analytic).abs() < 1e-5, "{act:?} at {x}: {numeric} vs {analytic}");
            }
        }
    }
}
