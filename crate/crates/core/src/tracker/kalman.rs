//! Constant-velocity Kalman filter over `(cx, cy, area, aspect)` with
//! velocities on the first three components.

use nalgebra::{SMatrix, SVector};

use crate::bbox::BBox;

pub type State = SVector<f64, 7>;
pub type Cov = SMatrix<f64, 7, 7>;
type Meas = SVector<f64, 4>;

fn transition() -> Cov {
    let mut f = Cov::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f[(2, 6)] = 1.0;
    f
}

fn process_noise() -> Cov {
    Cov::from_diagonal(&State::from_column_slice(&[1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4]))
}

fn measurement_noise() -> SMatrix<f64, 4, 4> {
    SMatrix::<f64, 4, 4>::from_diagonal(&Meas::new(1.0, 1.0, 10.0, 10.0))
}

fn observation() -> SMatrix<f64, 4, 7> {
    let mut h = SMatrix::<f64, 4, 7>::zeros();
    for k in 0..4 {
        h[(k, k)] = 1.0;
    }
    h
}

pub fn box_to_z(b: &BBox) -> Meas {
    let (cx, cy) = b.center();
    let w = b.width();
    let h = b.height();
    Meas::new(cx, cy, w * h, w / h)
}

/// Box for a state, or `None` when the area/aspect is degenerate.
pub fn state_to_box(x: &State) -> Option<BBox> {
    let (s, r) = (x[2], x[3]);
    if !(s > 0.0 && r > 0.0) {
        return None;
    }
    let w = (s * r).sqrt();
    let h = s / w;
    Some(BBox::new(x[0] - w / 2.0, x[1] - h / 2.0, x[0] + w / 2.0, x[1] + h / 2.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanBox {
    pub x: State,
    pub p: Cov,
}

impl KalmanBox {
    pub fn new(b: &BBox) -> Self {
        let z = box_to_z(b);
        let mut x = State::zeros();
        x.fixed_rows_mut::<4>(0).copy_from(&z);
        let p = Cov::from_diagonal(&State::from_column_slice(&[10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4]));
        Self { x, p }
    }

    /// One-frame prediction; a shrinking area that would go non-positive stops shrinking.
    pub fn predict(&mut self) {
        if self.x[6] + self.x[2] <= 0.0 {
            self.x[6] = 0.0;
        }
        let f = transition();
        self.x = f * self.x;
        self.p = f * self.p * f.transpose() + process_noise();
    }

    /// `gap` single-frame predictions.
    pub fn predict_steps(&mut self, gap: u32) {
        for _ in 0..gap {
            self.predict();
        }
    }

    /// Closed-form `gap`-frame prediction: `F^gap` and the accumulated process
    /// noise `sum_k F^k Q F^k'`. Equal to [`predict_steps`](Self::predict_steps)
    /// whenever the area guard does not fire.
    pub fn predict_gap(&mut self, gap: u32) {
        let f = transition();
        let q = process_noise();
        let mut fk = Cov::identity();
        let mut q_acc = Cov::zeros();
        for _ in 0..gap {
            q_acc += fk * q * fk.transpose();
            fk = f * fk;
        }
        self.x = fk * self.x;
        self.p = fk * self.p * fk.transpose() + q_acc;
    }

    pub fn update(&mut self, b: &BBox) {
        let h = observation();
        let z = box_to_z(b);
        let y = z - h * self.x;
        let s = h * self.p * h.transpose() + measurement_noise();
        let Some(s_inv) = s.try_inverse() else { return };
        let k = self.p * h.transpose() * s_inv;
        self.x += k * y;
        self.p = (Cov::identity() - k * h) * self.p;
    }

    pub fn bbox(&self) -> Option<BBox> {
        state_to_box(&self.x)
    }
}
