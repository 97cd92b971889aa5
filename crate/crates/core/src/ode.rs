//! Fixed-step classic Runge–Kutta with steps split at load events.

/// One integration step `[t, t + h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t: f64,
    pub h: f64,
    /// Grid index `k` when the step ends on the nominal grid point `k·dt`
    /// (or on `t_end`), `None` for the first half of a split step.
    pub grid_index: Option<usize>,
    pub is_last: bool,
}

/// Nominal grid `k·dt` up to `t_end`, with every breakpoint strictly inside a
/// grid interval splitting that interval in two. Breakpoints within a tiny
/// tolerance of a grid point replace that grid point exactly, so steps always
/// start precisely at event times.
#[derive(Debug, Clone)]
pub struct StepPlan {
    dt: f64,
    t_end: f64,
    breakpoints: Vec<f64>,
    next_bp: usize,
    k: usize,
    t: f64,
    done: bool,
}

impl StepPlan {
    pub fn new(dt: f64, t_end: f64, breakpoints: &[f64]) -> Self {
        let mut bps: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > 0.0 && b < t_end)
            .collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        Self {
            dt,
            t_end,
            breakpoints: bps,
            next_bp: 0,
            k: 1,
            t: 0.0,
            done: !(t_end > 0.0),
        }
    }

    fn snap(&self) -> f64 {
        1e-9 * self.dt
    }
}

impl Iterator for StepPlan {
    type Item = Step;

    fn next(&mut self) -> Option<Step> {
        if self.done {
            return None;
        }
        let snap = self.snap();
        while self.next_bp < self.breakpoints.len()
            && self.breakpoints[self.next_bp] <= self.t + snap
        {
            self.next_bp += 1;
        }

        let mut target = self.k as f64 * self.dt;
        if target >= self.t_end - snap {
            target = self.t_end;
        }
        let mut grid_index = Some(self.k);
        if let Some(&bp) = self.breakpoints.get(self.next_bp) {
            if bp < target - snap {
                target = bp;
                grid_index = None;
            } else if (bp - target).abs() <= snap {
                target = bp;
            }
        }
        if grid_index.is_some() {
            self.k += 1;
        }

        let is_last = target >= self.t_end;
        let step = Step {
            t: self.t,
            h: target - self.t,
            grid_index,
            is_last,
        };
        self.t = target;
        self.done = is_last;
        Some(step)
    }
}

/// Scratch buffers for [`rk4_step`].
#[derive(Debug, Clone)]
pub struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    pub fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

/// Advances `y` by one classic RK4 step of size `h`.
pub fn rk4_step<E, F>(
    t: f64,
    y: &mut [f64],
    h: f64,
    ws: &mut Rk4Workspace,
    mut f: F,
) -> Result<(), E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    let n = y.len();
    f(t, y, &mut ws.k1)?;
    for i in 0..n {
        ws.tmp[i] = y[i] + 0.5 * h * ws.k1[i];
    }
    f(t + 0.5 * h, &ws.tmp, &mut ws.k2)?;
    for i in 0..n {
        ws.tmp[i] = y[i] + 0.5 * h * ws.k2[i];
    }
    f(t + 0.5 * h, &ws.tmp, &mut ws.k3)?;
    for i in 0..n {
        ws.tmp[i] = y[i] + h * ws.k3[i];
    }
    f(t + h, &ws.tmp, &mut ws.k4)?;
    for i in 0..n {
        y[i] += h / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    }
    Ok(())
}
