//! Intervention studies as parameter sweeps over the closed forms.
//!
//! Three levers against in-queue transmission: capping occupancy (finite
//! capacity), splitting customers into designated time windows, and
//! raising the service rate. Each sweep emits a [`SweepTable`] that
//! serializes to CSV and JSON byte-reproducibly.

use crate::analytic::{mm1_r0, mmc_r0, mmck_r0, mmck_steady_state, windows_r0};
use crate::core::Error;
use crate::markov::priority_r0;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Provenance fields carried by every table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepMeta {
    /// Model family and fixed parameters.
    pub model: String,
    /// Transmission description.
    pub transmission: String,
    /// Name of the column that varies across rows.
    pub sweep: String,
    /// Generating library and version.
    pub generator: String,
    /// True when grid points were skipped.
    pub partial: bool,
}

/// Rectangular numeric table with provenance metadata and skip warnings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    /// Provenance.
    pub metadata: SweepMeta,
    /// Column names, one per cell.
    pub columns: Vec<String>,
    /// Numeric cells; reference and skipped rows use NaN placeholders.
    /// JSON carries non-finite cells as the strings `"NaN"`, `"inf"`,
    /// `"-inf"`.
    #[serde(with = "cell_rows")]
    pub rows: Vec<Vec<f64>>,
    /// One entry per skipped grid point.
    pub warnings: Vec<String>,
}

/// JSON codec for rows: finite cells as numbers, non-finite cells as
/// their decimal-form tags, since plain JSON has no NaN or infinity.
mod cell_rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Cell {
        Num(f64),
        Tag(String),
    }

    pub fn serialize<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let enc: Vec<Vec<Cell>> = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| {
                        if v.is_finite() {
                            Cell::Num(v)
                        } else {
                            Cell::Tag(v.to_string())
                        }
                    })
                    .collect()
            })
            .collect();
        enc.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let enc = Vec::<Vec<Cell>>::deserialize(d)?;
        enc.into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|c| match c {
                        Cell::Num(v) => Ok(v),
                        Cell::Tag(t) => match t.as_str() {
                            "NaN" => Ok(f64::NAN),
                            "inf" => Ok(f64::INFINITY),
                            "-inf" => Ok(f64::NEG_INFINITY),
                            _ => Err(serde::de::Error::custom(format!("bad cell tag {t}"))),
                        },
                    })
                    .collect()
            })
            .collect()
    }
}

/// Marks an ordinary grid row in tables that carry reference rows.
pub const ROW_DATA: f64 = 0.0;
/// Marks the priority-discipline reference row.
pub const ROW_PRIORITY_REF: f64 = 1.0;
/// Marks the FCFS (no intervention) reference row.
pub const ROW_FCFS_REF: f64 = 2.0;

impl SweepTable {
    /// Checks rectangularity and that the sweep column is strictly
    /// increasing over the rows where it is finite.
    ///
    /// # Errors
    ///
    /// `BadRange` naming the violated shape property.
    pub fn validate(&self) -> Result<(), Error> {
        for row in &self.rows {
            if row.len() != self.columns.len() {
                return Err(Error::bad_range("rows", "rectangular"));
            }
        }
        let Some(idx) = self.columns.iter().position(|c| *c == self.metadata.sweep) else {
            return Err(Error::bad_range("metadata.sweep", "a column name"));
        };
        let mut prev = f64::NEG_INFINITY;
        for row in &self.rows {
            let v = row[idx];
            if !v.is_finite() {
                continue;
            }
            if v <= prev {
                return Err(Error::bad_range("sweep column", "strictly increasing"));
            }
            prev = v;
        }
        Ok(())
    }

    /// Renders the table as CSV: `# key: value` metadata lines, one
    /// `# warning:` line per warning, a header row, then data rows.
    /// Numbers use the shortest decimal form that round-trips the binary
    /// value, so [`SweepTable::from_csv`] reconstructs the table exactly.
    #[must_use]
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# model: {}", self.metadata.model);
        let _ = writeln!(out, "# transmission: {}", self.metadata.transmission);
        let _ = writeln!(out, "# sweep: {}", self.metadata.sweep);
        let _ = writeln!(out, "# generator: {}", self.metadata.generator);
        let _ = writeln!(out, "# partial: {}", self.metadata.partial);
        for w in &self.warnings {
            let _ = writeln!(out, "# warning: {w}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// Parses the CSV form produced by [`SweepTable::to_csv`].
    ///
    /// # Errors
    ///
    /// `BadRange` on any malformed line, missing metadata key, or
    /// unparseable cell.
    pub fn from_csv(text: &str) -> Result<Self, Error> {
        let bad = |detail: &str| Error::bad_range("csv", detail);
        let mut fields: Vec<(String, String)> = Vec::new();
        let mut warnings = Vec::new();
        let mut lines = text.lines().peekable();
        while let Some(line) = lines.peek() {
            let Some(rest) = line.strip_prefix("# ") else {
                break;
            };
            let (key, value) = rest
                .split_once(": ")
                .ok_or_else(|| bad("metadata line without `key: value`"))?;
            if key == "warning" {
                warnings.push(value.to_string());
            } else {
                fields.push((key.to_string(), value.to_string()));
            }
            lines.next();
        }
        let mut take = |key: &str| -> Result<String, Error> {
            let pos = fields
                .iter()
                .position(|(k, _)| k == key)
                .ok_or_else(|| bad(&format!("missing metadata key {key}")))?;
            Ok(fields.remove(pos).1)
        };
        let metadata = SweepMeta {
            model: take("model")?,
            transmission: take("transmission")?,
            sweep: take("sweep")?,
            generator: take("generator")?,
            partial: take("partial")?
                .parse()
                .map_err(|_| bad("partial must be true or false"))?,
        };
        let header = lines.next().ok_or_else(|| bad("missing header row"))?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let row: Result<Vec<f64>, _> = line.split(',').map(str::parse).collect();
            rows.push(row.map_err(|_| bad("unparseable numeric cell"))?);
        }
        let table = SweepTable {
            metadata,
            columns,
            rows,
            warnings,
        };
        table.validate()?;
        Ok(table)
    }

    /// Renders the table as a JSON document with a metadata object, the
    /// column list, the row array, and warnings.
    #[must_use]
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }
}

fn generator() -> String {
    format!("r0sys {}", env!("CARGO_PKG_VERSION"))
}

/// Occupancy-cap study: risk versus loss probability as the capacity `k`
/// varies over `k_range`, for fixed `(lambda, mu, c, alpha)`. Columns are
/// `(k, cap_beyond_servers, r0_sys, loss_probability)`; a final reference
/// row with infinite `k` carries the uncapped value and zero loss.
///
/// # Errors
///
/// Parameter violations from the underlying evaluations, `BadRange` for
/// an empty range or `k < c`.
pub fn occupancy_sweep(
    lambda: f64,
    mu: f64,
    c: u32,
    alpha: f64,
    k_range: impl IntoIterator<Item = u32>,
) -> Result<SweepTable, Error> {
    let mut rows = Vec::new();
    for k in k_range {
        let report = mmck_r0(lambda, mu, c, k, alpha)?;
        let pi = mmck_steady_state(lambda, mu, c, k)?;
        let loss = *pi.probs().last().expect("k+1 states");
        rows.push(vec![f64::from(k), f64::from(k - c), report.r0_sys, loss]);
    }
    if rows.is_empty() {
        return Err(Error::bad_range("k_range", "at least one capacity"));
    }
    let uncapped = mmc_r0(lambda, mu, c, alpha)?;
    rows.push(vec![f64::INFINITY, f64::INFINITY, uncapped.r0_sys, 0.0]);
    for pair in rows.windows(2) {
        debug_assert!(
            pair[0][2] <= pair[1][2] + 1e-12 && pair[0][3] >= pair[1][3] - 1e-12,
            "risk must grow and loss must shrink with capacity"
        );
    }
    let table = SweepTable {
        metadata: SweepMeta {
            model: format!("mmck lambda={lambda} mu={mu} c={c}"),
            transmission: format!("exp alpha={alpha}"),
            sweep: "k".into(),
            generator: generator(),
            partial: false,
        },
        columns: ["k", "cap_beyond_servers", "r0_sys", "loss_probability"]
            .map(String::from)
            .to_vec(),
        rows,
        warnings: Vec::new(),
    };
    table.validate()?;
    Ok(table)
}

/// Designated-time-windows study: the per-class risk frontier as the
/// high-class time share `f` varies over `f_grid`, plus two reference
/// rows. Columns are `(f, r0_h, r0_l, row_kind, skip_code)`; `row_kind`
/// distinguishes grid rows ([`ROW_DATA`]) from the priority-discipline
/// ([`ROW_PRIORITY_REF`]) and FCFS ([`ROW_FCFS_REF`]) references, which
/// carry NaN in the `f` column. A grid point whose window load is
/// unstable is kept with NaN outputs, `skip_code` 1, and a warning.
///
/// # Errors
///
/// Parameter violations; `BadRange` for an empty or non-increasing grid.
pub fn windows_sweep(
    lambda_h: f64,
    lambda_l: f64,
    mu: f64,
    alpha: f64,
    f_grid: &[f64],
) -> Result<SweepTable, Error> {
    if f_grid.is_empty() {
        return Err(Error::bad_range("f_grid", "at least one share"));
    }
    let q_h = lambda_h / (lambda_h + lambda_l);
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &f in f_grid {
        match windows_r0(lambda_h, lambda_l, mu, alpha, f) {
            Ok(report) => rows.push(vec![
                f,
                report.r0_h.expect("windows reports classes"),
                report.r0_l.expect("windows reports classes"),
                ROW_DATA,
                0.0,
            ]),
            Err(Error::Unstable { condition }) => {
                warnings.push(format!("f={f} skipped: unstable: {condition}"));
                rows.push(vec![f, f64::NAN, f64::NAN, ROW_DATA, 1.0]);
            }
            Err(other) => return Err(other),
        }
    }
    let priority = priority_r0(lambda_h, lambda_l, mu, alpha, 1e-10)?;
    rows.push(vec![
        f64::NAN,
        priority.r0_h.expect("priority reports classes"),
        priority.r0_l.expect("priority reports classes"),
        ROW_PRIORITY_REF,
        0.0,
    ]);
    let fcfs = mm1_r0(lambda_h + lambda_l, mu, alpha)?;
    rows.push(vec![
        f64::NAN,
        q_h * fcfs.r0_sys,
        (1.0 - q_h) * fcfs.r0_sys,
        ROW_FCFS_REF,
        0.0,
    ]);
    let table = SweepTable {
        metadata: SweepMeta {
            model: format!("windows lambda_h={lambda_h} lambda_l={lambda_l} mu={mu}"),
            transmission: format!("exp alpha={alpha}"),
            sweep: "f".into(),
            generator: generator(),
            partial: !warnings.is_empty(),
        },
        columns: ["f", "r0_h", "r0_l", "row_kind", "skip_code"]
            .map(String::from)
            .to_vec(),
        rows,
        warnings,
    };
    table.validate()?;
    Ok(table)
}

/// Service-rate study: risk as the service rate scales by each factor in
/// `scale_grid`, for fixed `(lambda, mu, alpha)`. Columns are
/// `(k_mu, r0_sys)`.
///
/// # Errors
///
/// Parameter violations, including instability at any scale; `BadRange`
/// for an empty grid.
pub fn service_rate_sweep(
    lambda: f64,
    mu: f64,
    alpha: f64,
    scale_grid: &[f64],
) -> Result<SweepTable, Error> {
    if scale_grid.is_empty() {
        return Err(Error::bad_range("scale_grid", "at least one factor"));
    }
    let mut rows = Vec::new();
    for &k_mu in scale_grid {
        if !k_mu.is_finite() || k_mu <= 0.0 {
            return Err(Error::bad_range("k_mu", "finite and > 0"));
        }
        let report = mm1_r0(lambda, k_mu * mu, alpha)?;
        rows.push(vec![k_mu, report.r0_sys]);
    }
    let table = SweepTable {
        metadata: SweepMeta {
            model: format!("mm1 lambda={lambda} mu={mu}"),
            transmission: format!("exp alpha={alpha}"),
            sweep: "k_mu".into(),
            generator: generator(),
            partial: false,
        },
        columns: ["k_mu", "r0_sys"].map(String::from).to_vec(),
        rows,
        warnings: Vec::new(),
    };
    table.validate()?;
    Ok(table)
}

/// Largest arrival-rate factor `k_lambda` that keeps the arrival-weighted
/// risk `k_lambda * lambda * r0_sys(k_lambda * lambda, k_mu * mu)` at or
/// below its pre-intervention level `lambda * r0_sys(lambda, mu)`, given
/// a service-rate scale `k_mu`.
///
/// The weighted risk is continuous and strictly increasing in `k_lambda`
/// on `(0, k_mu * mu / lambda)`, running from zero to infinity, so the
/// level crossing exists and is unique; bisection brackets it to an
/// interval of width `1e-13` and the returned point satisfies a relative
/// risk residual below `1e-9`.
///
/// # Errors
///
/// Parameter violations; `Unstable` when `lambda >= k_mu * mu`; `NoRoot`
/// if the residual tolerance cannot be met (not reachable for admissible
/// inputs, kept as a guard).
pub fn max_lambda_scale(lambda: f64, mu: f64, alpha: f64, k_mu: f64) -> Result<f64, Error> {
    if !k_mu.is_finite() || k_mu <= 0.0 {
        return Err(Error::bad_range("k_mu", "finite and > 0"));
    }
    let target = lambda * mm1_r0(lambda, mu, alpha)?.r0_sys;
    let mu_new = k_mu * mu;
    // Confirms stability of the scaled system up front.
    mm1_r0(lambda, mu_new, alpha)?;
    let risk = |k_l: f64| {
        let l = k_l * lambda;
        l * mm1_r0(l, mu_new, alpha)
            .expect("0 < l < mu_new is stable")
            .r0_sys
    };
    let (mut lo, mut hi) = (0.0_f64, mu_new / lambda);
    // The open upper endpoint diverges; start inside the bracket.
    let mut hi_probe = hi * (1.0 - 1e-12);
    if risk(hi_probe) < target {
        hi_probe = hi;
    }
    hi = hi_probe;
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if risk(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k_l = 0.5 * (lo + hi);
    let residual = (risk(k_l) - target).abs() / target;
    if residual > 1e-9 {
        return Err(Error::NoRoot {
            detail: format!("risk residual {residual} at k_lambda={k_l}"),
        });
    }
    Ok(k_l)
}
