/// Scratch space for the classical fourth-order Runge–Kutta method of lines.
#[derive(Debug, Clone)]
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(len: usize) -> Self {
        Self {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            stage: vec![0.0; len],
        }
    }

    /// Advance `u` by `dt`. `rhs` must leave Dirichlet rows at zero;
    /// `impose` is re-applied to every stage and to the result.
    pub fn step<E>(
        &mut self,
        u: &mut [f64],
        dt: f64,
        mut rhs: impl FnMut(&[f64], &mut [f64]) -> Result<(), E>,
        impose: impl Fn(&mut [f64]),
    ) -> Result<(), E> {
        let Self {
            k1,
            k2,
            k3,
            k4,
            stage,
        } = self;
        rhs(u, k1)?;
        for ((s, u), k) in stage.iter_mut().zip(u.iter()).zip(k1.iter()) {
            *s = u + 0.5 * dt * k;
        }
        impose(stage);
        rhs(stage, k2)?;
        for ((s, u), k) in stage.iter_mut().zip(u.iter()).zip(k2.iter()) {
            *s = u + 0.5 * dt * k;
        }
        impose(stage);
        rhs(stage, k3)?;
        for ((s, u), k) in stage.iter_mut().zip(u.iter()).zip(k3.iter()) {
            *s = u + dt * k;
        }
        impose(stage);
        rhs(stage, k4)?;
        let w = dt / 6.0;
        for i in 0..u.len() {
            u[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        impose(u);
        Ok(())
    }
}
