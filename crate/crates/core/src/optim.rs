use ndarray::{Array2, Zip};

/// Adam with bias correction, applied as gradient *ascent*.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    first_moment: Array2<f64>,
    second_moment: Array2<f64>,
}

impl Adam {
    pub fn new(shape: (usize, usize), learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            first_moment: Array2::zeros(shape),
            second_moment: Array2::zeros(shape),
        }
    }

    /// Moves `param` uphill along `grad`.
    pub fn ascend(&mut self, param: &mut Array2<f64>, grad: &Array2<f64>) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let correction1 = 1.0 - b1.powi(self.step);
        let correction2 = 1.0 - b2.powi(self.step);
        let (lr, eps) = (self.learning_rate, self.epsilon);
        Zip::from(param)
            .and(grad)
            .and(&mut self.first_moment)
            .and(&mut self.second_moment)
            .for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *p += lr * m_hat / (v_hat.sqrt() + eps);
            });
    }
}
