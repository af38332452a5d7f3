//! Warmup adaptation: dual-averaging step size and a windowed diagonal
//! metric estimate.

/// Nesterov dual averaging of `log(step_size)` toward a target acceptance.
#[derive(Clone, Debug)]
pub struct DualAveraging {
    pub delta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub t0: f64,
    mu: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    pub fn new(delta: f64) -> Self {
        DualAveraging {
            delta,
            gamma: 0.05,
            kappa: 0.75,
            t0: 10.0,
            mu: 0.0,
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    /// Resets the averages and anchors the shrinkage point at `log(10 * eps)`.
    pub fn restart(&mut self, step_size: f64) {
        self.mu = (10.0 * step_size).ln();
        self.counter = 0.0;
        self.s_bar = 0.0;
        self.x_bar = 0.0;
    }

    /// Returns the next step size given the last acceptance statistic.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let a = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + self.t0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - a);
        let x = self.mu - self.s_bar * self.counter.sqrt() / self.gamma;
        let x_eta = self.counter.powf(-self.kappa);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    /// Averaged step size used after warmup.
    pub fn final_step_size(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Welford running mean and variance per coordinate.
#[derive(Clone, Debug)]
pub struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub fn new(dim: usize) -> Self {
        Welford { n: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn restart(&mut self) {
        self.n = 0;
        self.mean.fill(0.0);
        self.m2.fill(0.0);
    }

    pub fn add(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &xi) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = xi - *m;
            *m += delta / n;
            *s += delta * (xi - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn variance(&self) -> Vec<f64> {
        let denom = (self.n as f64 - 1.0).max(1.0);
        self.m2.iter().map(|s| s / denom).collect()
    }
}

/// Warmup schedule: an initial fast buffer, doubling slow windows for the
/// metric, and a terminal fast buffer.
#[derive(Clone, Debug)]
pub struct WindowSchedule {
    num_warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    enabled: bool,
}

impl WindowSchedule {
    pub const INIT_BUFFER: usize = 75;
    pub const TERM_BUFFER: usize = 50;
    pub const BASE_WINDOW: usize = 25;

    pub fn new(num_warmup: usize) -> Self {
        let (mut init, mut term, mut base) = (Self::INIT_BUFFER, Self::TERM_BUFFER, Self::BASE_WINDOW);
        let enabled = num_warmup >= 20;
        if enabled && init + base + term > num_warmup {
            init = (0.15 * num_warmup as f64) as usize;
            term = (0.1 * num_warmup as f64) as usize;
            base = num_warmup - (init + term);
        }
        WindowSchedule {
            num_warmup,
            init_buffer: init,
            term_buffer: term,
            window_size: base,
            next_window: init + base - 1,
            counter: 0,
            enabled,
        }
    }

    fn in_window(&self) -> bool {
        self.enabled
            && self.counter >= self.init_buffer
            && self.counter < self.num_warmup - self.term_buffer
            && self.counter != self.num_warmup
    }

    fn at_window_end(&self) -> bool {
        self.enabled && self.counter == self.next_window && self.counter != self.num_warmup
    }

    fn compute_next_window(&mut self) {
        let last = self.num_warmup - self.term_buffer - 1;
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last {
            let boundary = self.next_window + 2 * self.window_size;
            if boundary >= self.num_warmup - self.term_buffer {
                self.next_window = last;
            }
        }
    }
}

/// Diagonal inverse-metric estimation over the slow windows.
#[derive(Clone, Debug)]
pub struct MetricAdaptation {
    schedule: WindowSchedule,
    estimator: Welford,
}

impl MetricAdaptation {
    pub fn new(dim: usize, num_warmup: usize) -> Self {
        MetricAdaptation { schedule: WindowSchedule::new(num_warmup), estimator: Welford::new(dim) }
    }

    /// Feeds one warmup position. Returns true when a window closed and
    /// `inv_metric` was replaced by the regularized variance estimate.
    pub fn learn(&mut self, inv_metric: &mut [f64], q: &[f64]) -> bool {
        if self.schedule.in_window() {
            self.estimator.add(q);
        }
        if self.schedule.at_window_end() {
            self.schedule.compute_next_window();
            let n = self.estimator.count() as f64;
            let var = self.estimator.variance();
            for (m, v) in inv_metric.iter_mut().zip(var) {
                *m = (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0));
            }
            self.estimator.restart();
            self.schedule.counter += 1;
            return true;
        }
        self.schedule.counter += 1;
        false
    }
}
