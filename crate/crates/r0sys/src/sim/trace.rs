//! Per-customer event records for debugging and invariant checks.

use crate::core::Error;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// Version header written before the records.
pub const TRACE_HEADER: &str = "r0sys-trace v1";

/// One customer's lifetime. A blocked customer has `departure == arrival`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CustomerRecord {
    /// Arrival-order index, unique within the trace.
    pub id: u64,
    /// 0 for single-class models and the high class, 1 for the low class.
    pub class: u8,
    /// Arrival epoch.
    pub arrival: f64,
    /// Departure epoch; equals `arrival` for blocked customers.
    pub departure: f64,
    /// True when the customer was refused admission.
    pub blocked: bool,
}

/// A complete simulated history over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTrace {
    /// Records sorted by id (= arrival order).
    pub records: Vec<CustomerRecord>,
    /// Last event epoch covered by the trace.
    pub horizon: f64,
}

impl EventTrace {
    /// Writes the versioned line format: a header, a horizon line, then one
    /// `id class arrival departure blocked` line per record.
    pub fn write_to<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        writeln!(out, "horizon {}", self.horizon)?;
        for r in &self.records {
            writeln!(
                out,
                "{} {} {} {} {}",
                r.id,
                r.class,
                r.arrival,
                r.departure,
                u8::from(r.blocked)
            )?;
        }
        Ok(())
    }

    /// Structural invariants: ids strictly increasing, arrivals
    /// nondecreasing, sojourns nonnegative, blocked customers zero-length,
    /// events inside the horizon.
    pub fn validate(&self) -> Result<(), Error> {
        let mut prev_id = None;
        let mut prev_arrival = f64::NEG_INFINITY;
        for r in &self.records {
            if prev_id.is_some_and(|p| r.id <= p) {
                return Err(Error::bad_range("trace", "ids must be strictly increasing"));
            }
            prev_id = Some(r.id);
            if r.arrival < prev_arrival {
                return Err(Error::bad_range("trace", "arrivals must be nondecreasing"));
            }
            prev_arrival = r.arrival;
            if !(r.arrival >= 0.0 && r.departure >= r.arrival) {
                return Err(Error::bad_range("trace", "departure must follow arrival"));
            }
            if r.blocked && r.departure != r.arrival {
                return Err(Error::bad_range("trace", "blocked records are zero-length"));
            }
            if r.arrival > self.horizon {
                return Err(Error::bad_range("trace", "arrival beyond horizon"));
            }
        }
        Ok(())
    }

    /// Counts (arrived, departed, blocked, in-system at horizon).
    pub fn conservation(&self) -> (u64, u64, u64, u64) {
        let mut departed = 0;
        let mut blocked = 0;
        let mut in_system = 0;
        for r in &self.records {
            if r.blocked {
                blocked += 1;
            } else if r.departure <= self.horizon {
                departed += 1;
            } else {
                in_system += 1;
            }
        }
        (self.records.len() as u64, departed, blocked, in_system)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: u64, arrival: f64, departure: f64, blocked: bool) -> CustomerRecord {
        CustomerRecord {
            id,
            class: 0,
            arrival,
            departure,
            blocked,
        }
    }

    #[test]
    fn dump_format_is_versioned() {
        let t = EventTrace {
            records: vec![rec(0, 0.25, 1.5, false), rec(1, 0.5, 0.5, true)],
            horizon: 2.0,
        };
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "r0sys-trace v1");
        assert_eq!(lines[1], "horizon 2");
        assert_eq!(lines[2], "0 0 0.25 1.5 0");
        assert_eq!(lines[3], "1 0 0.5 0.5 1");
    }

    #[test]
    fn validate_accepts_and_counts() {
        let t = EventTrace {
            records: vec![
                rec(0, 0.0, 3.0, false),
                rec(1, 1.0, 1.0, true),
                rec(2, 1.5, 2.5, false),
            ],
            horizon: 2.75,
        };
        t.validate().unwrap();
        assert_eq!(t.conservation(), (3, 1, 1, 1));
    }

    #[test]
    fn validate_rejects_negative_sojourn() {
        let t = EventTrace {
            records: vec![rec(0, 1.0, 0.5, false)],
            horizon: 2.0,
        };
        assert!(t.validate().is_err());
    }
}
