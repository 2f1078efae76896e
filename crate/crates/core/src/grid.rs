//! Uniform periodic grid over the unit square parameter domain.

/// Grid sizes along the two parameter directions. Storage is row-major
/// with the x^2 index contiguous: idx = i * n2 + j.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct GridDims {
    pub n1: usize,
    pub n2: usize,
}

impl GridDims {
    pub fn new(n1: usize, n2: usize) -> Self {
        GridDims { n1, n2 }
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    /// Grid spacings h1 = 1/n1, h2 = 1/n2.
    pub fn spacing(&self) -> (f64, f64) {
        (1.0 / self.n1 as f64, 1.0 / self.n2 as f64)
    }

    /// Parameter coordinates of node (i, j).
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 / self.n1 as f64, j as f64 / self.n2 as f64)
    }

    #[inline]
    pub fn wrap1(&self, i: isize) -> usize {
        i.rem_euclid(self.n1 as isize) as usize
    }

    #[inline]
    pub fn wrap2(&self, j: isize) -> usize {
        j.rem_euclid(self.n2 as isize) as usize
    }
}

/// Cyclically shift a grid field by (s1, s2) nodes: out(i, j) = f(i+s1, j+s2).
pub fn shift_field<T: Copy>(dims: GridDims, field: &[T], s1: isize, s2: isize) -> Vec<T> {
    let mut out = Vec::with_capacity(field.len());
    for i in 0..dims.n1 {
        let si = dims.wrap1(i as isize + s1);
        for j in 0..dims.n2 {
            let sj = dims.wrap2(j as isize + s2);
            out.push(field[dims.idx(si, sj)]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_row_major_in_the_second_axis() {
        let dims = GridDims::new(3, 5);
        assert_eq!(dims.idx(0, 4), 4);
        assert_eq!(dims.idx(1, 0), 5);
        assert_eq!(dims.len(), 15);
        assert_eq!(dims.spacing(), (1.0 / 3.0, 0.2));
    }

    #[test]
    fn shift_wraps_periodically() {
        let dims = GridDims::new(2, 3);
        let f: Vec<i32> = (0..6).collect();
        let s = shift_field(dims, &f, 1, -1);
        assert_eq!(s, vec![5, 3, 4, 2, 0, 1]);
    }
}
