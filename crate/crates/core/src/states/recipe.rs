use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::{Error, Result};

/// Description of an analytic test state.
///
/// The canonical text form, produced by `Display` and accepted by `FromStr`:
///
/// ```text
/// gaussian(s=1,k0=2,q0=0)
/// plane_wave(k=0.6283185307179586)
/// oscillator(level=1,omega=1)
/// superposition([1,0]gaussian(s=1,k0=0,q0=-4);[1,0]gaussian(s=1,k0=0,q0=4))
/// ```
///
/// Superposition coefficients are written `[re,im]`.
#[derive(Debug, Clone, PartialEq)]
pub enum StateRecipe {
    /// `exp(−(q−q0)²/(4s²) + i·k0·q)`: position spread `s`, momentum `ħk0`.
    Gaussian { s: f64, k0: f64, q0: f64 },
    /// `exp(i·k·q)`; `k·L/(2π)` must be an integer.
    PlaneWave { k: f64 },
    /// Harmonic-oscillator eigenstate centred at `q = 0`.
    OscillatorEigenstate { level: u32, omega: f64 },
    /// Linear combination of individually normalized branches.
    Superposition(Vec<(Complex64, StateRecipe)>),
}

impl StateRecipe {
    pub fn gaussian(s: f64, k0: f64, q0: f64) -> Self {
        StateRecipe::Gaussian { s, k0, q0 }
    }

    pub fn oscillator(level: u32, omega: f64) -> Self {
        StateRecipe::OscillatorEigenstate { level, omega }
    }

    /// Equal-weight superposition of the given branches.
    pub fn even_superposition(branches: impl IntoIterator<Item = StateRecipe>) -> Self {
        StateRecipe::Superposition(branches.into_iter().map(|b| (Complex64::new(1.0, 0.0), b)).collect())
    }

    /// False when any component is a plane wave.
    pub fn is_localized(&self) -> bool {
        match self {
            StateRecipe::PlaneWave { .. } => false,
            StateRecipe::Superposition(b) => b.iter().all(|(_, r)| r.is_localized()),
            _ => true,
        }
    }
}

impl fmt::Display for StateRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateRecipe::Gaussian { s, k0, q0 } => write!(f, "gaussian(s={s},k0={k0},q0={q0})"),
            StateRecipe::PlaneWave { k } => write!(f, "plane_wave(k={k})"),
            StateRecipe::OscillatorEigenstate { level, omega } => {
                write!(f, "oscillator(level={level},omega={omega})")
            }
            StateRecipe::Superposition(branches) => {
                f.write_str("superposition(")?;
                for (i, (c, r)) in branches.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "[{},{}]{r}", c.re, c.im)?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for StateRecipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut parser = Parser { src: &compact, pos: 0 };
        let recipe = parser.recipe()?;
        if parser.pos != compact.len() {
            return Err(parser.fail("recipe", "trailing characters"));
        }
        Ok(recipe)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn fail(&self, field: &str, what: &str) -> Error {
        Error::input(format!("state: {field}: {what} (at offset {})", self.pos))
    }

    fn expect(&mut self, ch: char, field: &str) -> Result<()> {
        if self.rest().starts_with(ch) {
            self.pos += ch.len_utf8();
            Ok(())
        } else {
            Err(self.fail(field, &format!("expected '{ch}'")))
        }
    }

    fn ident(&mut self) -> &'a str {
        let rest = self.rest();
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn number(&mut self, field: &str) -> Result<f64> {
        let rest = self.rest();
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(rest.len());
        let value: f64 = rest[..len].parse().map_err(|_| self.fail(field, "expected a number"))?;
        if !value.is_finite() {
            return Err(self.fail(field, "value must be finite"));
        }
        self.pos += len;
        Ok(value)
    }

    fn recipe(&mut self) -> Result<StateRecipe> {
        let name = self.ident();
        self.expect('(', name)?;
        let recipe = match name {
            "gaussian" => {
                let f = self.fields(name, &["s", "k0", "q0"])?;
                StateRecipe::Gaussian {
                    s: f[0],
                    k0: f[1],
                    q0: f[2],
                }
            }
            "plane_wave" => {
                let f = self.fields(name, &["k"])?;
                StateRecipe::PlaneWave { k: f[0] }
            }
            "oscillator" => {
                let f = self.fields(name, &["level", "omega"])?;
                if f[0] < 0.0 || f[0].fract() != 0.0 {
                    return Err(self.fail("oscillator.level", "must be a non-negative integer"));
                }
                StateRecipe::OscillatorEigenstate {
                    level: f[0] as u32,
                    omega: f[1],
                }
            }
            "superposition" => {
                let mut branches = Vec::new();
                loop {
                    self.expect('[', "superposition.coefficient")?;
                    let re = self.number("superposition.coefficient")?;
                    self.expect(',', "superposition.coefficient")?;
                    let im = self.number("superposition.coefficient")?;
                    self.expect(']', "superposition.coefficient")?;
                    branches.push((Complex64::new(re, im), self.recipe()?));
                    if self.rest().starts_with(';') {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                StateRecipe::Superposition(branches)
            }
            "" => return Err(self.fail("recipe", "missing state name")),
            other => return Err(self.fail("recipe", &format!("unknown state '{other}'"))),
        };
        self.expect(')', name)?;
        Ok(recipe)
    }

    /// Parses `key=value` pairs in any order; every key in `keys` is required.
    fn fields(&mut self, state: &str, keys: &[&str]) -> Result<Vec<f64>> {
        let mut values: Vec<Option<f64>> = vec![None; keys.len()];
        while !self.rest().starts_with(')') {
            let key = self.ident();
            let idx = keys
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| self.fail(state, &format!("unknown field '{key}'")))?;
            let field = format!("{state}.{key}");
            self.expect('=', &field)?;
            values[idx] = Some(self.number(&field)?);
            if self.rest().starts_with(',') {
                self.pos += 1;
            } else if !self.rest().starts_with(')') {
                return Err(self.fail(&field, "expected ',' or ')'"));
            }
        }
        keys.iter()
            .zip(values)
            .map(|(k, v)| v.ok_or_else(|| self.fail(state, &format!("missing field '{k}'"))))
            .collect()
    }
}
