use std::fmt::Write as _;
use std::io::{Read, Write};

use super::{region_counts, solve_fixed_point, CollisionModel, DcfError, DcfParams, SolverSettings};

/// Densities are tabulated as node counts per this many square meters
/// (one square kilometer).
pub const DENSITY_UNIT_M2: f64 = 1e6;

/// Precomputed conditional collision probabilities over a density × distance
/// grid. Rows are densities, columns are sender–receiver distances.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionTable {
    densities: Vec<f64>,
    distances: Vec<f64>,
    grid: Vec<Vec<f64>>,
}

fn check_axis(name: &str, axis: &[f64]) -> Result<(), DcfError> {
    if axis.is_empty() {
        return Err(DcfError::InvalidAxes(format!("{name} axis is empty")));
    }
    if axis.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(DcfError::InvalidAxes(format!("{name} axis has negative or non-finite values")));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DcfError::InvalidAxes(format!("{name} axis must be strictly increasing")));
    }
    Ok(())
}

impl CollisionTable {
    pub fn new(densities: Vec<f64>, distances: Vec<f64>, grid: Vec<Vec<f64>>) -> Result<Self, DcfError> {
        check_axis("density", &densities)?;
        check_axis("distance", &distances)?;
        if grid.len() != densities.len() || grid.iter().any(|row| row.len() != distances.len()) {
            return Err(DcfError::InvalidAxes("grid shape does not match axes".into()));
        }
        if grid.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(DcfError::InvalidAxes("grid entries must lie in [0, 1]".into()));
        }
        Ok(Self { densities, distances, grid })
    }

    /// The published reference grid (densities 90–120 per km², distances
    /// 100–250 m). The last column is taken to be 250 m.
    pub fn published() -> Self {
        Self {
            densities: vec![90.0, 100.0, 110.0, 120.0],
            distances: vec![100.0, 150.0, 200.0, 250.0],
            grid: vec![
                vec![0.1444, 0.2535, 0.3319, 0.3910],
                vec![0.1781, 0.2727, 0.3436, 0.4062],
                vec![0.1781, 0.2727, 0.3544, 0.4198],
                vec![0.1781, 0.2898, 0.3739, 0.4323],
            ],
        }
    }

    /// A table that reports zero collision probability everywhere.
    pub fn collision_free() -> Self {
        Self { densities: vec![0.0], distances: vec![0.0], grid: vec![vec![0.0]] }
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn get(&self, density_row: usize, distance_col: usize) -> f64 {
        self.grid[density_row][distance_col]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.grid
    }

    /// Iterates `(density, distance, p_c)` in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.densities.iter().zip(&self.grid).flat_map(move |(&den, row)| {
            self.distances.iter().zip(row).map(move |(&dist, &p)| (den, dist, p))
        })
    }

    /// Non-decreasing along every row (distance) and every column (density).
    pub fn is_monotone(&self) -> bool {
        let rows_ok = self.grid.iter().all(|row| row.windows(2).all(|w| w[1] >= w[0]));
        let cols_ok = self
            .grid
            .windows(2)
            .all(|pair| pair[0].iter().zip(&pair[1]).all(|(a, b)| b >= a));
        rows_ok && cols_ok
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("density,distance_m,p_c\n");
        for (den, dist, p) in self.cells() {
            let _ = writeln!(out, "{den:.6},{dist:.6},{p:.6}");
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_csv_string().as_bytes())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, DcfError> {
        let mut reader = csv::Reader::from_reader(r);
        let headers = reader.headers().map_err(|e| DcfError::Csv(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["density", "distance_m", "p_c"] {
            return Err(DcfError::Csv(format!("unexpected header {headers:?}")));
        }
        let mut cells = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| DcfError::Csv(e.to_string()))?;
            let field = |i: usize| -> Result<f64, DcfError> {
                record
                    .get(i)
                    .ok_or_else(|| DcfError::Csv("short row".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| DcfError::Csv(e.to_string()))
            };
            cells.push((field(0)?, field(1)?, field(2)?));
        }
        let mut densities: Vec<f64> = cells.iter().map(|c| c.0).collect();
        let mut distances: Vec<f64> = cells.iter().map(|c| c.1).collect();
        densities.sort_by(f64::total_cmp);
        densities.dedup();
        distances.sort_by(f64::total_cmp);
        distances.dedup();
        if cells.len() != densities.len() * distances.len() {
            return Err(DcfError::Csv("rows do not form a complete grid".into()));
        }
        let mut grid = vec![vec![f64::NAN; distances.len()]; densities.len()];
        for (den, dist, p) in cells {
            let i = densities.iter().position(|d| *d == den).expect("axis built from cells");
            let j = distances.iter().position(|d| *d == dist).expect("axis built from cells");
            if !grid[i][j].is_nan() {
                return Err(DcfError::Csv(format!("duplicate cell ({den}, {dist})")));
            }
            grid[i][j] = p;
        }
        Self::new(densities, distances, grid)
    }
}

/// Solves every `(density, distance)` cell. Densities are per km².
pub fn build_table(
    densities: &[f64],
    distances: &[f64],
    params: &DcfParams,
    settings: SolverSettings,
) -> Result<CollisionTable, DcfError> {
    check_axis("density", densities)?;
    check_axis("distance", distances)?;
    params.validate()?;
    let grid = densities
        .iter()
        .map(|&den| {
            distances
                .iter()
                .map(|&dist| {
                    let counts = region_counts(den / DENSITY_UNIT_M2, dist, params);
                    solve_fixed_point(counts, params, settings).map(|s| s.p_c).map_err(|e| {
                        DcfError::Cell { density: den, distance: dist, source: Box::new(e) }
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    CollisionTable::new(densities.to_vec(), distances.to_vec(), grid)
}

/// Collision probability for an arbitrary configuration.
///
/// The density snaps to the nearest tabulated row (the lower row on an exact
/// tie). Along the distance axis the two bracketing columns are averaged with
/// inverse-distance weights; queries outside the axis clamp to the boundary.
pub fn lookup_p_c(table: &CollisionTable, density: f64, distance: f64) -> f64 {
    let row = nearest_index(&table.densities, density);
    let values = &table.grid[row];
    let axis = &table.distances;
    let last = axis.len() - 1;
    if distance <= axis[0] {
        return values[0];
    }
    if distance >= axis[last] {
        return values[last];
    }
    // axis[hi-1] < distance < axis[hi], or an exact hit
    let hi = axis.partition_point(|&d| d < distance);
    if axis[hi] == distance {
        return values[hi];
    }
    let lo = hi - 1;
    let gap_lo = distance - axis[lo];
    let gap_hi = axis[hi] - distance;
    // weights 1/gap_lo and 1/gap_hi, normalized
    (gap_hi * values[lo] + gap_lo * values[hi]) / (gap_lo + gap_hi)
}

fn nearest_index(axis: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, v) in axis.iter().enumerate().skip(1) {
        if (v - x).abs() < (axis[best] - x).abs() {
            best = i;
        }
    }
    best
}

/// Outcome of fitting the carrier-sense radius to a reference grid.
#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub carrier_sense_radius: f64,
    pub model: CollisionModel,
    pub reproduced: CollisionTable,
    /// `reproduced - reference`, same shape as the grid.
    pub deviations: Vec<Vec<f64>>,
    pub sum_squared_error: f64,
    pub max_abs_deviation: f64,
}

/// Least-squares fit of the carrier-sense radius, all other parameters held
/// at `base`. Scans `[lo, hi]` in 1 m steps, then refines around the best
/// step with golden-section search.
pub fn calibrate_carrier_sense_radius(
    reference: &CollisionTable,
    base: &DcfParams,
    radius_range: (f64, f64),
    settings: SolverSettings,
) -> Result<CalibrationReport, DcfError> {
    let (lo, hi) = radius_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(DcfError::InvalidParams("radius range must satisfy 0 < lo < hi".into()));
    }
    let sse = |radius: f64| -> Result<f64, DcfError> {
        let params = DcfParams { carrier_sense_radius: radius, ..base.clone() };
        let table = build_table(&reference.densities, &reference.distances, &params, settings)?;
        Ok(table
            .cells()
            .zip(reference.cells())
            .map(|((_, _, a), (_, _, b))| (a - b) * (a - b))
            .sum())
    };

    let steps = (hi - lo).floor() as usize;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=steps {
        let r = lo + k as f64;
        let e = sse(r)?;
        if e < best.0 {
            best = (e, r);
        }
    }
    let (mut a, mut b) = ((best.1 - 1.0).max(lo), (best.1 + 1.0).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (sse(c)?, sse(d)?);
    for _ in 0..40 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = sse(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = sse(d)?;
        }
    }
    let refined = if fc < fd { (fc, c) } else { (fd, d) };
    let (sum_squared_error, radius) = if refined.0 < best.0 { refined } else { best };

    let params = DcfParams { carrier_sense_radius: radius, ..base.clone() };
    let reproduced = build_table(&reference.densities, &reference.distances, &params, settings)?;
    let deviations: Vec<Vec<f64>> = reproduced
        .grid
        .iter()
        .zip(&reference.grid)
        .map(|(r, t)| r.iter().zip(t).map(|(a, b)| a - b).collect())
        .collect();
    let max_abs_deviation = deviations.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(CalibrationReport {
        carrier_sense_radius: radius,
        model: base.collision_model,
        reproduced,
        deviations,
        sum_squared_error,
        max_abs_deviation,
    })
}
