//! Lumped-element two-port model of the shunt ohmic switch.
//!
//! The switch shunts the signal line to ground: closed (down) it is a small
//! resistance giving isolation, open (up) a small capacitance giving low
//! insertion loss. With shunt admittance Y on a matched line of impedance
//! Z0, `S21 = 2 / (2 + Y Z0)` and `S11 = -Y Z0 / (2 + Y Z0)`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Contact resistance versus contact force as a power law anchored at one
/// reference point. The default (1 ohm at 100 uN, exponent -1/3) matches a
/// Hertzian single-asperity gold contact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactLaw {
    pub r_ref: f64,
    pub f_ref: f64,
    pub exponent: f64,
}

impl Default for ContactLaw {
    fn default() -> Self {
        Self {
            r_ref: 1.0,
            f_ref: 100e-6,
            exponent: -1.0 / 3.0,
        }
    }
}

/// Lumped shunt-switch circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchCircuit {
    /// Down-state (closed) shunt resistance (ohm).
    pub r_down: f64,
    /// Down-state series inductance (H); defaults to 0, the measured band
    /// shows no resonance to fit it from.
    #[serde(default)]
    pub l_down: f64,
    /// Up-state (open) shunt capacitance (F).
    pub c_up: f64,
    /// Reference impedance (ohm).
    #[serde(default = "default_z0")]
    pub z0: f64,
}

fn default_z0() -> f64 {
    50.0
}

/// Which branch of the switch the model evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchState {
    Up,
    Down,
}

/// Frequency response of the two-port, `S12 = S21` and `S22 = S11` by
/// symmetry of the shunt model.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPortResponse {
    pub freqs: Vec<f64>,
    pub s11: Vec<Complex64>,
    pub s21: Vec<Complex64>,
    pub z0: f64,
}

impl TwoPortResponse {
    /// |S21| in dB at grid point i.
    pub fn s21_db(&self, i: usize) -> f64 {
        20.0 * self.s21[i].norm().log10()
    }

    pub fn s11_db(&self, i: usize) -> f64 {
        20.0 * self.s11[i].norm().log10()
    }
}

/// Errors from the RF module.
#[derive(Debug, Error)]
pub enum RfError {
    #[error("contact force must be positive, got {value:.3e} N")]
    NonPositiveForce { value: f64 },
    #[error("frequency grid is empty")]
    EmptyGrid,
    #[error("frequency grid must be ascending and positive")]
    NonAscendingGrid,
    #[error("target {name} = {value} dB is unreachable")]
    UnreachableTarget { name: &'static str, value: f64 },
    #[error("circuit parameter {name} must be non-negative, got {value:.3e}")]
    NegativeParameter { name: &'static str, value: f64 },
    #[error("touchstone parse error at line {line}: {reason}")]
    TouchstoneParse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Contact resistance from contact force: `R = r_ref (F/f_ref)^exponent`.
pub fn contact_resistance(force: f64, law: &ContactLaw) -> Result<f64, RfError> {
    if !(force > 0.0) {
        return Err(RfError::NonPositiveForce { value: force });
    }
    Ok(law.r_ref * (force / law.f_ref).powf(law.exponent))
}

fn check_grid(freqs: &[f64]) -> Result<(), RfError> {
    if freqs.is_empty() {
        return Err(RfError::EmptyGrid);
    }
    if freqs[0] <= 0.0 || freqs.windows(2).any(|p| p[1] <= p[0]) {
        return Err(RfError::NonAscendingGrid);
    }
    Ok(())
}

/// S-parameters of the shunt switch over a frequency grid.
pub fn shunt_sparams(
    circuit: &SwitchCircuit,
    state: SwitchState,
    freqs: &[f64],
) -> Result<TwoPortResponse, RfError> {
    check_grid(freqs)?;
    for (name, v) in [
        ("r_down", circuit.r_down),
        ("l_down", circuit.l_down),
        ("c_up", circuit.c_up),
    ] {
        if v < 0.0 {
            return Err(RfError::NegativeParameter { name, value: v });
        }
    }
    if circuit.z0 <= 0.0 {
        return Err(RfError::NegativeParameter {
            name: "z0",
            value: circuit.z0,
        });
    }
    let mut s11 = Vec::with_capacity(freqs.len());
    let mut s21 = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let omega = 2.0 * PI * f;
        let y = match state {
            SwitchState::Down => {
                let z = Complex64::new(circuit.r_down, omega * circuit.l_down);
                if z.norm() == 0.0 {
                    // Ideal short: S21 = 0, S11 = -1.
                    s11.push(Complex64::new(-1.0, 0.0));
                    s21.push(Complex64::new(0.0, 0.0));
                    continue;
                }
                z.inv()
            }
            SwitchState::Up => Complex64::new(0.0, omega * circuit.c_up),
        };
        let yz = y * circuit.z0;
        let denom = yz + 2.0;
        s21.push(Complex64::new(2.0, 0.0) / denom);
        s11.push(-yz / denom);
    }
    Ok(TwoPortResponse {
        freqs: freqs.to_vec(),
        s11,
        s21,
        z0: circuit.z0,
    })
}

/// Closed-form inversion of the two magnitude targets: the down-state
/// isolation fixes `r_down`, the up-state insertion loss fixes `c_up`
/// (`l_down` stays 0).
pub fn fit_lumped(
    isolation_db_at_f: (f64, f64),
    insertion_db_at_f: (f64, f64),
    z0: f64,
) -> Result<SwitchCircuit, RfError> {
    let (iso_db, _f_iso) = isolation_db_at_f;
    let (ins_db, f_ins) = insertion_db_at_f;
    if z0 <= 0.0 {
        return Err(RfError::NegativeParameter {
            name: "z0",
            value: z0,
        });
    }
    if iso_db >= 0.0 {
        return Err(RfError::UnreachableTarget {
            name: "isolation",
            value: iso_db,
        });
    }
    if ins_db > 0.0 || ins_db <= -3.0 {
        return Err(RfError::UnreachableTarget {
            name: "insertion loss",
            value: ins_db,
        });
    }
    // Down state, l = 0: |S21| = 2R/(2R + Z0) = m.
    let m_iso = 10f64.powf(iso_db / 20.0);
    let r_down = m_iso * z0 / (2.0 * (1.0 - m_iso));
    // Up state: |S21| = 2/|2 + j w C Z0| = m  =>  wCZ0 = 2 sqrt(1/m^2 - 1).
    let m_ins = 10f64.powf(ins_db / 20.0);
    let c_up = if ins_db == 0.0 {
        0.0
    } else {
        2.0 * (1.0 / (m_ins * m_ins) - 1.0).sqrt() / (2.0 * PI * f_ins * z0)
    };
    Ok(SwitchCircuit {
        r_down,
        l_down: 0.0,
        c_up,
        z0,
    })
}

/// Writes the response as a two-port Touchstone v1 file, option line
/// `# HZ S MA R <z0>`, rows `f |S11| ang(S11) |S21| ang(S21) |S12| ang(S12)
/// |S22| ang(S22)` with angles in degrees.
pub fn export_touchstone(response: &TwoPortResponse, path: &Path) -> Result<(), RfError> {
    check_grid(&response.freqs)?;
    let mut out = String::new();
    let _ = writeln!(out, "! shunt switch two-port S-parameters");
    let _ = writeln!(out, "# HZ S MA R {}", format_sig(response.z0));
    for i in 0..response.freqs.len() {
        let s11 = response.s11[i];
        let s21 = response.s21[i];
        // Reciprocal symmetric shunt: S12 = S21, S22 = S11.
        let cols = [s11, s21, s21, s11];
        let mut row = format_sig(response.freqs[i]);
        for c in cols {
            let _ = write!(
                row,
                " {} {}",
                format_sig(c.norm()),
                format_sig(c.arg().to_degrees())
            );
        }
        let _ = writeln!(out, "{row}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn format_sig(v: f64) -> String {
    format!("{v:.12e}")
}

/// Reads back a two-port Touchstone v1 file in the MA format this module
/// writes (any of the HZ/KHZ/MHZ/GHZ frequency units).
pub fn import_touchstone(path: &Path) -> Result<TwoPortResponse, RfError> {
    let text = std::fs::read_to_string(path)?;
    let mut unit_scale = 1.0;
    let mut z0 = 50.0;
    let mut saw_option = false;
    let mut freqs = Vec::new();
    let mut s11 = Vec::new();
    let mut s21 = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            let mut i = 0;
            while i < toks.len() {
                match toks[i].to_ascii_uppercase().as_str() {
                    "HZ" => unit_scale = 1.0,
                    "KHZ" => unit_scale = 1e3,
                    "MHZ" => unit_scale = 1e6,
                    "GHZ" => unit_scale = 1e9,
                    "S" => {}
                    "MA" => {}
                    "RI" | "DB" => {
                        return Err(RfError::TouchstoneParse {
                            line: ln + 1,
                            reason: format!("unsupported format {}", toks[i]),
                        })
                    }
                    "R" => {
                        i += 1;
                        z0 = toks.get(i).and_then(|t| t.parse().ok()).ok_or(
                            RfError::TouchstoneParse {
                                line: ln + 1,
                                reason: "missing impedance after R".into(),
                            },
                        )?;
                    }
                    other => {
                        return Err(RfError::TouchstoneParse {
                            line: ln + 1,
                            reason: format!("unknown option {other}"),
                        })
                    }
                }
                i += 1;
            }
            saw_option = true;
            continue;
        }
        if !saw_option {
            return Err(RfError::TouchstoneParse {
                line: ln + 1,
                reason: "data before option line".into(),
            });
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| RfError::TouchstoneParse {
                line: ln + 1,
                reason: e.to_string(),
            })?;
        if vals.len() != 9 {
            return Err(RfError::TouchstoneParse {
                line: ln + 1,
                reason: format!("expected 9 columns, got {}", vals.len()),
            });
        }
        freqs.push(vals[0] * unit_scale);
        let polar = |m: f64, deg: f64| Complex64::from_polar(m, deg.to_radians());
        s11.push(polar(vals[1], vals[2]));
        s21.push(polar(vals[3], vals[4]));
    }
    if freqs.is_empty() {
        return Err(RfError::EmptyGrid);
    }
    Ok(TwoPortResponse {
        freqs,
        s11,
        s21,
        z0,
    })
}
