use crate::error::{Error, Result};

pub const MAX_SOBOL_DIMENSION: usize = 32;

const BITS: usize = 32;

/// Primitive-polynomial parameters `(s, a, m_1..m_s)` for dimensions 2..=32,
/// copied from the `new-joe-kuo-6.21201` direction-number file. Dimension 1
/// is the van der Corput sequence (all `m_k = 1`).
const JOE_KUO: [(u32, u32, &[u32]); MAX_SOBOL_DIMENSION - 1] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
    (7, 7, &[1, 1, 3, 13, 7, 35, 63]),
    (7, 8, &[1, 3, 5, 9, 1, 25, 53]),
    (7, 14, &[1, 3, 1, 13, 9, 35, 107]),
    (7, 19, &[1, 3, 1, 5, 27, 61, 31]),
    (7, 21, &[1, 1, 5, 11, 19, 41, 61]),
    (7, 28, &[1, 3, 5, 3, 3, 13, 69]),
    (7, 31, &[1, 1, 7, 13, 1, 19, 1]),
    (7, 32, &[1, 3, 7, 5, 13, 19, 59]),
    (7, 37, &[1, 1, 3, 9, 25, 29, 41]),
    (7, 41, &[1, 3, 5, 13, 23, 1, 55]),
    (7, 42, &[1, 3, 7, 3, 13, 59, 17]),
];

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[dim - 1];
    let s = s as usize;
    for k in 0..s {
        v[k] = m[k] << (BITS - 1 - k);
    }
    for k in s..BITS {
        v[k] = v[k - s] ^ (v[k - s] >> s);
        for j in 1..s {
            if (a >> (s - 1 - j)) & 1 == 1 {
                v[k] ^= v[k - j];
            }
        }
    }
    v
}

/// Unscrambled Sobol sequence in Gray-code order, one 32-bit integer per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolState {
    directions: Vec<[u32; BITS]>,
    current: Vec<u32>,
    next_index: u64,
}

impl SobolState {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 || dimension > MAX_SOBOL_DIMENSION {
            return Err(Error::Sampling(format!(
                "Sobol dimension must be in 1..={MAX_SOBOL_DIMENSION}, got {dimension}"
            )));
        }
        Ok(Self {
            directions: (0..dimension).map(direction_numbers).collect(),
            current: vec![0; dimension],
            next_index: 0,
        })
    }

    pub fn dimension(&self) -> usize {
        self.directions.len()
    }

    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    /// Point at `next_index`, then advances. Index 0 is the origin.
    pub fn next_point(&mut self) -> Result<Vec<f64>> {
        if self.next_index >= 1u64 << BITS {
            return Err(Error::Sampling("Sobol sequence exhausted after 2^32 points".into()));
        }
        let scale = 1.0 / (1u64 << BITS) as f64;
        let point = self.current.iter().map(|&x| x as f64 * scale).collect();
        let c = (self.next_index as u32).trailing_ones() as usize;
        if c < BITS {
            for (x, v) in self.current.iter_mut().zip(&self.directions) {
                *x ^= v[c];
            }
        }
        self.next_index += 1;
        Ok(point)
    }
}
