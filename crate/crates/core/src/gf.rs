//! GF(2^q) arithmetic for q in {1, 4, 8}.
//!
//! Reduction polynomials: q=8 uses x^8+x^4+x^3+x+1 (0x11B), q=4 uses
//! x^4+x+1 (0x13). GF(2) needs none. Multiplication goes through a full
//! product table per field, built once.

use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GfError {
    #[error("unsupported field exponent q = {0} (expected 1, 4 or 8)")]
    UnsupportedField(u8),
    #[error("value {value} does not fit in GF(2^{q})")]
    OutOfRange { value: u8, q: u8 },
    #[error("operands from GF(2^{0}) and GF(2^{1})")]
    FieldMismatch(u8, u8),
    #[error("zero has no inverse")]
    ZeroInverse,
}

/// A binary extension field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Field {
    q: u8,
}

struct Tables {
    mul: Vec<u8>,
    inv: Vec<u8>,
}

fn reduction_poly(q: u8) -> u16 {
    match q {
        1 => 0b10,
        4 => 0x13,
        _ => 0x11B,
    }
}

/// Shift-and-add product with reduction.
fn slow_mul(q: u8, a: u8, mut b: u8) -> u8 {
    if q == 1 {
        return a & b;
    }
    let poly = reduction_poly(q);
    let top = 1u16 << q;
    let mut acc: u16 = 0;
    let mut x = a as u16;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= x;
        }
        b >>= 1;
        x <<= 1;
        if x & top != 0 {
            x ^= poly;
        }
    }
    acc as u8
}

fn tables(q: u8) -> &'static Tables {
    static T1: OnceLock<Tables> = OnceLock::new();
    static T4: OnceLock<Tables> = OnceLock::new();
    static T8: OnceLock<Tables> = OnceLock::new();
    let cell = match q {
        1 => &T1,
        4 => &T4,
        _ => &T8,
    };
    cell.get_or_init(|| {
        let size = 1usize << q;
        let mut mul = vec![0u8; size * size];
        let mut inv = vec![0u8; size];
        for a in 0..size {
            for b in 0..size {
                let p = slow_mul(q, a as u8, b as u8);
                mul[a * size + b] = p;
                if p == 1 {
                    inv[a] = b as u8;
                }
            }
        }
        Tables { mul, inv }
    })
}

impl Field {
    pub fn new(q: u8) -> Result<Field, GfError> {
        match q {
            1 | 4 | 8 => Ok(Field { q }),
            _ => Err(GfError::UnsupportedField(q)),
        }
    }

    pub fn q(self) -> u8 {
        self.q
    }

    pub fn order(self) -> usize {
        1 << self.q
    }

    #[inline]
    pub fn mul(self, a: u8, b: u8) -> u8 {
        tables(self.q).mul[(a as usize) << self.q | b as usize]
    }

    #[inline]
    pub fn add(self, a: u8, b: u8) -> u8 {
        a ^ b
    }

    pub fn inv(self, a: u8) -> Result<u8, GfError> {
        if a == 0 {
            return Err(GfError::ZeroInverse);
        }
        Ok(tables(self.q).inv[a as usize])
    }

    pub fn element(self, value: u8) -> Result<GfElement, GfError> {
        if (value as usize) >= self.order() {
            return Err(GfError::OutOfRange { value, q: self.q });
        }
        Ok(GfElement { value, field: self })
    }
}

/// A field element tagged with its field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GfElement {
    value: u8,
    field: Field,
}

impl GfElement {
    pub fn new(value: u8, q: u8) -> Result<Self, GfError> {
        Field::new(q)?.element(value)
    }

    pub fn value(self) -> u8 {
        self.value
    }

    pub fn q(self) -> u8 {
        self.field.q
    }

    pub fn inverse(self) -> Result<GfElement, GfError> {
        self.field.element(self.field.inv(self.value)?)
    }
}

fn same_field(x: GfElement, y: GfElement) -> Result<Field, GfError> {
    if x.field != y.field {
        return Err(GfError::FieldMismatch(x.q(), y.q()));
    }
    Ok(x.field)
}

pub fn gf_mul(x: GfElement, y: GfElement) -> Result<GfElement, GfError> {
    let f = same_field(x, y)?;
    Ok(GfElement {
        value: f.mul(x.value, y.value),
        field: f,
    })
}

pub fn gf_add(x: GfElement, y: GfElement) -> Result<GfElement, GfError> {
    let f = same_field(x, y)?;
    Ok(GfElement {
        value: f.add(x.value, y.value),
        field: f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn el(v: u8, q: u8) -> GfElement {
        GfElement::new(v, q).unwrap()
    }

    #[test]
    fn byte_field_examples() {
        assert_eq!(gf_mul(el(0x02, 8), el(0x03, 8)).unwrap().value(), 0x06);
        assert_eq!(gf_mul(el(0x80, 8), el(0x02, 8)).unwrap().value(), 0x1B);
        assert_eq!(gf_mul(el(0x53, 8), el(0xCA, 8)).unwrap().value(), 0x01);
    }

    // log/antilog tables from the generator 0x03, built by repeated
    // multiplication in plain shift-xor form
    #[test]
    fn products_match_log_tables() {
        let mut exp = [0u8; 255];
        let mut log = [0usize; 256];
        let mut x: u16 = 1;
        for (i, slot) in exp.iter_mut().enumerate() {
            *slot = x as u8;
            log[x as usize] = i;
            // x *= 3  ==  x ^ (x << 1), reduced
            let mut y = (x << 1) ^ x;
            if y & 0x100 != 0 {
                y ^= 0x11B;
            }
            x = y;
        }
        assert_eq!(x, 1);
        let f = Field::new(8).unwrap();
        for a in 1..=255u8 {
            for b in 1..=255u8 {
                let want = exp[(log[a as usize] + log[b as usize]) % 255];
                assert_eq!(f.mul(a, b), want);
            }
            assert_eq!(f.mul(a, 0), 0);
        }
    }

    #[test]
    fn identities_and_inverses() {
        for q in [1u8, 4, 8] {
            let f = Field::new(q).unwrap();
            for v in 0..f.order() as u8 {
                let x = el(v, q);
                assert_eq!(gf_mul(x, el(1, q)).unwrap(), x);
                assert_eq!(gf_add(x, x).unwrap().value(), 0);
                if v != 0 {
                    assert_eq!(gf_mul(x, x.inverse().unwrap()).unwrap().value(), 1);
                }
            }
        }
        assert_eq!(el(0, 4).inverse(), Err(GfError::ZeroInverse));
    }

    #[test]
    fn errors() {
        assert_eq!(Field::new(3), Err(GfError::UnsupportedField(3)));
        assert_eq!(
            GfElement::new(16, 4),
            Err(GfError::OutOfRange { value: 16, q: 4 })
        );
        assert_eq!(
            gf_mul(el(1, 4), el(1, 8)),
            Err(GfError::FieldMismatch(4, 8))
        );
    }

    proptest! {
        #[test]
        fn field_axioms(q in prop::sample::select(vec![1u8, 4, 8]), a: u8, b: u8, c: u8) {
            let f = Field::new(q).unwrap();
            let mask = (f.order() - 1) as u8;
            let (a, b, c) = (a & mask, b & mask, c & mask);
            prop_assert_eq!(f.mul(a, b), f.mul(b, a));
            prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            prop_assert_eq!(f.mul(a, b ^ c), f.mul(a, b) ^ f.mul(a, c));
        }
    }
}
