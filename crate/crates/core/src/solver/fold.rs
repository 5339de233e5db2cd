//! Voltage continuation with fold (limit-point) and event bracketing.
//!
//! The same scan-and-bisect drivers serve the beam equilibrium path, the
//! single-DOF plate harness that validates it, and the stiction scans.
//! Instability at a voltage is declared on any of three concordant signals:
//! the warm-started solve fails, the tangent at the converged state is not
//! positive definite, or the displacement measure jumps past the threshold.

/// A one-parameter family of equilibrium problems indexed by voltage.
pub(crate) trait FoldSystem {
    type State: Clone;

    /// Solves at voltage `v` warm-starting from `warm`. `None` when the
    /// solve does not converge; otherwise the state and whether the tangent
    /// there is positive definite.
    fn solve_at(&self, v: f64, warm: &Self::State) -> Option<(Self::State, bool)>;

    /// Scalar displacement measure used for jump detection.
    fn displacement(&self, s: &Self::State) -> f64;

    /// Displacement jump that counts as an instability signal.
    fn jump_threshold(&self) -> f64;
}

pub(crate) struct FoldBracket<S> {
    /// Highest voltage on the near branch (stable / not yet released /
    /// no event, depending on the driver).
    pub v_stable: f64,
    /// Lowest voltage on the far side; `v_unstable - v_stable <= bisect_tol`.
    pub v_unstable: f64,
    /// Converged state at `v_stable`.
    pub stable_state: S,
}

enum Class<S> {
    Stable(S),
    Unstable(Option<S>),
}

fn classify<F: FoldSystem>(
    sys: &F,
    outcome: Option<(F::State, bool)>,
    reference: &F::State,
) -> Class<F::State> {
    let trace = std::env::var_os("FREEFLEX_FOLD_TRACE").is_some();
    match outcome {
        None => {
            if trace {
                eprintln!("classify: solve failed -> unstable");
            }
            Class::Unstable(None)
        }
        Some((s, stable)) => {
            if !stable {
                if trace {
                    eprintln!(
                        "classify: tangent indefinite at disp {:.4e} -> unstable",
                        sys.displacement(&s)
                    );
                }
                Class::Unstable(Some(s))
            } else if (sys.displacement(&s) - sys.displacement(reference)).abs()
                > sys.jump_threshold()
            {
                if trace {
                    eprintln!(
                        "classify: jump {:.4e} -> {:.4e} -> unstable",
                        sys.displacement(reference),
                        sys.displacement(&s)
                    );
                }
                Class::Unstable(Some(s))
            } else {
                Class::Stable(s)
            }
        }
    }
}

/// Ascending scan from `v_start` (where `start_state` must be a stable
/// equilibrium) to at most `v_max`, followed by bisection of the first
/// stable/unstable bracket down to `bisect_tol`. Returns `None` when no
/// instability occurs at or below `v_max`.
pub(crate) fn bracket_fold<F: FoldSystem>(
    sys: &F,
    start_state: F::State,
    v_start: f64,
    v_max: f64,
    step: f64,
    bisect_tol: f64,
) -> Option<FoldBracket<F::State>> {
    let mut v_lo = v_start;
    let mut s_lo = start_state;
    loop {
        let v = (v_lo + step).min(v_max);
        if v <= v_lo {
            return None; // reached v_max without instability
        }
        match classify(sys, sys.solve_at(v, &s_lo), &s_lo) {
            Class::Stable(s) => {
                v_lo = v;
                s_lo = s;
            }
            Class::Unstable(_) => {
                let mut v_hi = v;
                while v_hi - v_lo > bisect_tol {
                    let mid = 0.5 * (v_lo + v_hi);
                    match classify(sys, sys.solve_at(mid, &s_lo), &s_lo) {
                        Class::Stable(s) => {
                            v_lo = mid;
                            s_lo = s;
                        }
                        Class::Unstable(_) => {
                            v_hi = mid;
                        }
                    }
                }
                // A steep but smooth branch can trip the jump signal over a
                // wide step; re-test from the tight bracket before reporting.
                match classify(sys, sys.solve_at(v_hi, &s_lo), &s_lo) {
                    Class::Unstable(_) => {
                        return Some(FoldBracket {
                            v_stable: v_lo,
                            v_unstable: v_hi,
                            stable_state: s_lo,
                        });
                    }
                    Class::Stable(s) => {
                        // False alarm; resume the scan from here.
                        v_lo = v_hi;
                        s_lo = s;
                    }
                }
            }
        }
    }
}

/// Warm-started solve at `v` from a state converged at `v_from`; on failure
/// retries through intermediate voltages before giving up. A transient
/// Newton hiccup on a smooth branch is thereby distinguished from a genuine
/// end of the branch.
fn substep_solve<F: FoldSystem>(
    sys: &F,
    v: f64,
    v_from: f64,
    warm: &F::State,
) -> Option<(F::State, bool)> {
    if let Some(out) = sys.solve_at(v, warm) {
        return Some(out);
    }
    let mut state = warm.clone();
    let mut last = None;
    for k in 1..=4 {
        let vk = v_from + (v - v_from) * k as f64 / 4.0;
        match sys.solve_at(vk, &state) {
            Some((s, stable)) => {
                state = s.clone();
                last = Some((s, stable));
            }
            None => return None,
        }
    }
    last
}

pub(crate) enum ReleaseOutcome<S> {
    /// Bracketed release: `v_stable` = highest released voltage found,
    /// `v_unstable` = lowest still-held voltage.
    Released(FoldBracket<S>),
    /// Still held at `v_min`; carries the converged state there.
    Held(S),
}

/// Descending scan from `v_start` (with `start_state` on the held branch)
/// toward `v_min`, locating the voltage where `released` first holds;
/// bisection refines to `bisect_tol`. `Err(v)` reports a failed solve.
///
/// A solve that fails from the held warm start means the held branch folded
/// between the two voltages: the structure releases dynamically. The scan
/// retries from the fallback state (typically flat); only if that also fails
/// is the error propagated.
pub(crate) fn bracket_release<F, R>(
    sys: &F,
    start_state: F::State,
    fallback_state: F::State,
    v_start: f64,
    v_min: f64,
    step: f64,
    bisect_tol: f64,
    released: R,
) -> Result<ReleaseOutcome<F::State>, f64>
where
    F: FoldSystem,
    R: Fn(&F::State) -> bool,
{
    let solve = |v: f64, v_from: f64, warm: &F::State| -> Option<(F::State, bool)> {
        substep_solve(sys, v, v_from, warm).or_else(|| sys.solve_at(v, &fallback_state))
    };
    let mut v_hi = v_start;
    let mut s_hi = start_state;
    loop {
        let v = (v_hi - step).max(v_min);
        if v >= v_hi {
            return Ok(ReleaseOutcome::Held(s_hi));
        }
        let Some((s, _)) = solve(v, v_hi, &s_hi) else {
            return Err(v);
        };
        if released(&s) {
            let mut v_rel = v;
            let mut s_rel = s;
            while v_hi - v_rel > bisect_tol {
                let mid = 0.5 * (v_rel + v_hi);
                let Some((sm, _)) = solve(mid, v_hi, &s_hi) else {
                    return Err(mid);
                };
                if released(&sm) {
                    v_rel = mid;
                    s_rel = sm;
                } else {
                    v_hi = mid;
                    s_hi = sm;
                }
            }
            return Ok(ReleaseOutcome::Released(FoldBracket {
                v_stable: v_rel,
                v_unstable: v_hi,
                stable_state: s_rel,
            }));
        }
        if v <= v_min {
            return Ok(ReleaseOutcome::Held(s));
        }
        v_hi = v;
        s_hi = s;
    }
}

pub(crate) enum AscendOutcome<S> {
    /// Event bracketed: `v_stable` = last no-event voltage, `v_unstable` =
    /// first event voltage.
    Event(FoldBracket<S>),
    /// No event up to `v_max`; carries the converged state there.
    NoEvent(S),
}

/// Ascending scan from `v_start` until `event` first holds at a converged
/// state; bisection refines to `bisect_tol`. `Err(v)` reports a failed solve.
///
/// As in [`bracket_release`], a failed warm-started solve retries from the
/// fallback state before the error is propagated.
pub(crate) fn bracket_event_ascending<F, E>(
    sys: &F,
    start_state: F::State,
    fallback_state: F::State,
    v_start: f64,
    v_max: f64,
    step: f64,
    bisect_tol: f64,
    event: E,
) -> Result<AscendOutcome<F::State>, f64>
where
    F: FoldSystem,
    E: Fn(&F::State) -> bool,
{
    let solve = |v: f64, v_from: f64, warm: &F::State| -> Option<(F::State, bool)> {
        substep_solve(sys, v, v_from, warm).or_else(|| sys.solve_at(v, &fallback_state))
    };
    let mut v_lo = v_start;
    let mut s_lo = start_state;
    loop {
        let v = (v_lo + step).min(v_max);
        if v <= v_lo {
            return Ok(AscendOutcome::NoEvent(s_lo));
        }
        let Some((s, _)) = solve(v, v_lo, &s_lo) else {
            return Err(v);
        };
        if event(&s) {
            let mut v_hi = v;
            while v_hi - v_lo > bisect_tol {
                let mid = 0.5 * (v_lo + v_hi);
                let Some((sm, _)) = solve(mid, v_lo, &s_lo) else {
                    return Err(mid);
                };
                if event(&sm) {
                    v_hi = mid;
                } else {
                    v_lo = mid;
                    s_lo = sm;
                }
            }
            return Ok(AscendOutcome::Event(FoldBracket {
                v_stable: v_lo,
                v_unstable: v_hi,
                stable_state: s_lo,
            }));
        }
        if v >= v_max {
            return Ok(AscendOutcome::NoEvent(s));
        }
        v_lo = v;
        s_lo = s;
    }
}
