use super::tape::Mat;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Mat>,
    v: Vec<Mat>,
    t: i32,
}

impl Adam {
    pub fn new(params: &[Mat]) -> Self {
        let zeros: Vec<Mat> = params.iter().map(|p| Mat::zeros(p.raw_dim())).collect();
        Self { m: zeros.clone(), v: zeros, t: 0 }
    }

    /// Applies one update. Parameters without a gradient are left alone but
    /// their moments still decay.
    pub fn step(&mut self, params: &mut [Mat], grads: &[Option<Mat>], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (i, p) in params.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            match grads.get(i).and_then(Option::as_ref) {
                Some(g) => {
                    ndarray::Zip::from(&mut *m).and(&mut *v).and(g).for_each(|m, v, &g| {
                        *m = BETA1 * *m + (1.0 - BETA1) * g;
                        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    });
                    ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                        *p -= lr * (m / c1) / ((v / c2).sqrt() + EPSILON);
                    });
                }
                None => {
                    m.mapv_inplace(|x| x * BETA1);
                    v.mapv_inplace(|x| x * BETA2);
                }
            }
        }
    }
}

/// Linear warmup over the first tenth of training, then linear decay to zero.
#[derive(Debug, Clone, Copy)]
pub struct LinearSchedule {
    pub base_lr: f64,
    pub total_steps: usize,
    pub warmup_steps: usize,
}

impl LinearSchedule {
    pub fn new(base_lr: f64, total_steps: usize) -> Self {
        Self { base_lr, total_steps, warmup_steps: total_steps / 10 }
    }

    /// Learning rate for the zero-based `step`.
    pub fn lr(&self, step: usize) -> f64 {
        let s = (step + 1) as f64;
        if step < self.warmup_steps {
            return self.base_lr * s / self.warmup_steps as f64;
        }
        let remaining = self.total_steps.saturating_sub(self.warmup_steps).max(1) as f64;
        let done = (step - self.warmup_steps) as f64;
        self.base_lr * (1.0 - done / remaining).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![Mat::from_elem((1, 2), 1.0)];
        let mut adam = Adam::new(&p);
        let g = vec![Some(Mat::from_shape_vec((1, 2), vec![3.0, -0.5]).unwrap())];
        adam.step(&mut p, &g, 0.1);
        assert!((p[0][[0, 0]] - 0.9).abs() < 1e-6);
        assert!((p[0][[0, 1]] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = vec![Mat::from_elem((1, 3), 5.0)];
        let mut adam = Adam::new(&p);
        for _ in 0..2000 {
            let g = p[0].mapv(|x| 2.0 * (x - 1.0));
            adam.step(&mut p, &[Some(g)], 0.05);
        }
        assert!(p[0].iter().all(|&x| (x - 1.0).abs() < 1e-3));
    }

    #[test]
    fn missing_gradient_leaves_param() {
        let mut p = vec![Mat::from_elem((2, 2), 0.5)];
        let mut adam = Adam::new(&p);
        adam.step(&mut p, &[None], 0.1);
        assert!(p[0].iter().all(|&x| x == 0.5));
    }

    #[test]
    fn schedule_shape() {
        let s = LinearSchedule::new(1.0, 100);
        assert!((s.lr(0) - 0.1).abs() < 1e-12);
        assert!((s.lr(9) - 1.0).abs() < 1e-12);
        assert!((s.lr(10) - 1.0).abs() < 1e-12);
        assert!(s.lr(99) > 0.0 && s.lr(99) < 0.02);
        assert!((0..99).all(|i| i < 10 || s.lr(i) >= s.lr(i + 1)));
        let tiny = LinearSchedule::new(0.5, 3);
        assert!((tiny.lr(0) - 0.5).abs() < 1e-12);
    }
}
