use crate::error::{domain, Error, Result};

/// A T x d panel of copula-scale observations with a missingness mask.
///
/// Values are stored row-major; missing cells hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaScaleData {
    n_time: usize,
    n_margins: usize,
    u: Vec<f64>,
    observed: Vec<bool>,
}

impl CopulaScaleData {
    /// Builds a panel from rows; `None` marks a missing cell. Every observed
    /// value must lie strictly inside (0, 1).
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let n_time = rows.len();
        if n_time == 0 {
            return Err(domain("copula-scale data has no rows"));
        }
        let n_margins = rows[0].len();
        if n_margins == 0 {
            return Err(domain("copula-scale data has no columns"));
        }
        let mut u = Vec::with_capacity(n_time * n_margins);
        let mut observed = Vec::with_capacity(n_time * n_margins);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n_margins {
                return Err(domain(format!(
                    "row {t} has {} columns, expected {n_margins}",
                    row.len()
                )));
            }
            for (j, cell) in row.iter().enumerate() {
                match *cell {
                    Some(x) if x > 0.0 && x < 1.0 => {
                        u.push(x);
                        observed.push(true);
                    }
                    Some(x) => {
                        return Err(domain(format!("cell ({t}, {j}) = {x} is outside (0, 1)")));
                    }
                    None => {
                        u.push(f64::NAN);
                        observed.push(false);
                    }
                }
            }
        }
        Ok(CopulaScaleData { n_time, n_margins, u, observed })
    }

    /// Fully observed panel from row-major values.
    pub fn from_complete(n_time: usize, n_margins: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_time * n_margins {
            return Err(domain("value count does not match dimensions"));
        }
        let rows: Vec<Vec<Option<f64>>> = values
            .chunks(n_margins)
            .map(|r| r.iter().map(|&x| Some(x)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn n_margins(&self) -> usize {
        self.n_margins
    }

    pub fn get(&self, t: usize, j: usize) -> Option<f64> {
        let k = t * self.n_margins + j;
        self.observed[k].then_some(self.u[k])
    }

    pub fn is_observed(&self, t: usize, j: usize) -> bool {
        self.observed[t * self.n_margins + j]
    }

    /// Time indices with an observation in margin `j`.
    pub fn observed_times(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_time).filter(move |&t| self.is_observed(t, j))
    }

    pub fn observed_count(&self, j: usize) -> usize {
        self.observed_times(j).count()
    }

    pub fn missing_cells(&self) -> Vec<(usize, usize)> {
        (0..self.n_time)
            .flat_map(|t| (0..self.n_margins).map(move |j| (t, j)))
            .filter(|&(t, j)| !self.is_observed(t, j))
            .collect()
    }

    pub fn rows(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.n_time)
            .map(|t| (0..self.n_margins).map(|j| self.get(t, j)).collect())
            .collect()
    }

    /// Copy with the listed cells marked missing.
    pub fn with_masked(&self, cells: &[(usize, usize)]) -> Result<Self> {
        let mut out = self.clone();
        for &(t, j) in cells {
            if t >= self.n_time || j >= self.n_margins {
                return Err(Error::Range(format!("cell ({t}, {j}) outside the panel")));
            }
            let k = t * self.n_margins + j;
            out.observed[k] = false;
            out.u[k] = f64::NAN;
        }
        Ok(out)
    }

    /// Copy keeping only the first `n` time points.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_time {
            return Err(Error::Range(format!("cannot keep {n} of {} rows", self.n_time)));
        }
        let k = n * self.n_margins;
        Ok(CopulaScaleData {
            n_time: n,
            n_margins: self.n_margins,
            u: self.u[..k].to_vec(),
            observed: self.observed[..k].to_vec(),
        })
    }

    /// Errors if some margin has no observed cell.
    pub fn require_observed_margins(&self) -> Result<()> {
        for j in 0..self.n_margins {
            if self.observed_count(j) == 0 {
                return Err(Error::Config(format!("margin {} has no observed values", j + 1)));
            }
        }
        Ok(())
    }
}
