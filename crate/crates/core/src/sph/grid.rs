//! Cell-list neighbour search in a periodic box.

use super::Vec3;

/// Minimum-image difference `a - b` in the first `dims` coordinates.
#[inline]
pub fn min_image(a: Vec3, b: Vec3, box_l: f64, dims: usize) -> Vec3 {
    let mut d = [0.0; 3];
    let half = 0.5 * box_l;
    for k in 0..dims {
        let mut v = a[k] - b[k];
        if v > half {
            v -= box_l;
        } else if v < -half {
            v += box_l;
        }
        d[k] = v;
    }
    d
}

/// Particles bucketed into cubic cells at least one kernel support wide.
/// Stored CSR-style: the particles of cell `c` are
/// `particles[start[c]..start[c + 1]]`, ascending.
#[derive(Debug, Clone)]
pub struct CellGrid {
    pub dims: usize,
    pub cells_per_axis: usize,
    pub cell_size: f64,
    pub box_l: f64,
    start: Vec<usize>,
    particles: Vec<usize>,
    // Distinct neighbour cells (including itself) of every cell.
    neighbours: Vec<Vec<usize>>,
}

impl CellGrid {
    pub fn build(positions: &[Vec3], box_l: f64, support: f64, dims: usize) -> Self {
        let n_axis = ((box_l / support).floor() as usize).max(1);
        let cell_size = box_l / n_axis as f64;
        let n_cells = n_axis.pow(dims as u32);
        let cell_of = |p: &Vec3| {
            let mut c = 0;
            for k in (0..dims).rev() {
                let i = ((p[k] / cell_size).floor() as isize).clamp(0, n_axis as isize - 1) as usize;
                c = c * n_axis + i;
            }
            c
        };
        let mut count = vec![0usize; n_cells + 1];
        let cells: Vec<usize> = positions.iter().map(cell_of).collect();
        for &c in &cells {
            count[c + 1] += 1;
        }
        for c in 0..n_cells {
            count[c + 1] += count[c];
        }
        let start = count.clone();
        let mut fill = count;
        let mut particles = vec![0; positions.len()];
        for (i, &c) in cells.iter().enumerate() {
            particles[fill[c]] = i;
            fill[c] += 1;
        }
        let neighbours = (0..n_cells)
            .map(|c| {
                let mut idx = [0usize; 3];
                let mut rem = c;
                for item in idx.iter_mut().take(dims) {
                    *item = rem % n_axis;
                    rem /= n_axis;
                }
                let mut out = Vec::with_capacity(3usize.pow(dims as u32));
                let span = |k: usize| if k < dims { -1..=1isize } else { 0..=0 };
                for dz in span(2) {
                    for dy in span(1) {
                        for dx in span(0) {
                            let off = [dx, dy, dz];
                            let mut nc = 0;
                            for k in (0..dims).rev() {
                                let i = (idx[k] as isize + off[k]).rem_euclid(n_axis as isize) as usize;
                                nc = nc * n_axis + i;
                            }
                            out.push(nc);
                        }
                    }
                }
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect();
        Self {
            dims,
            cells_per_axis: n_axis,
            cell_size,
            box_l,
            start,
            particles,
            neighbours,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.start.len() - 1
    }

    pub fn cell_particles(&self, c: usize) -> &[usize] {
        &self.particles[self.start[c]..self.start[c + 1]]
    }

    pub fn cell_of(&self, p: &Vec3) -> usize {
        let n = self.cells_per_axis;
        let mut c = 0;
        for k in (0..self.dims).rev() {
            let i = ((p[k] / self.cell_size).floor() as isize).clamp(0, n as isize - 1) as usize;
            c = c * n + i;
        }
        c
    }

    /// Candidate particles near `p` (every particle in adjacent cells).
    pub fn candidates<'a>(&'a self, p: &Vec3) -> impl Iterator<Item = usize> + 'a {
        let c = self.cell_of(p);
        self.neighbours[c].iter().flat_map(move |&nc| self.cell_particles(nc).iter().copied())
    }
}

/// Per-particle neighbour lists (`j != i`, `|r_ij| < support`), ascending
/// in `j`, with the minimum-image separation `r_i - r_j` and distance.
#[derive(Debug, Clone, Default)]
pub struct Neighbours {
    pub offsets: Vec<usize>,
    pub index: Vec<usize>,
    pub rij: Vec<Vec3>,
    pub dist: Vec<f64>,
}

impl Neighbours {
    pub fn of(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    fn assemble(per: Vec<Vec<(usize, Vec3, f64)>>) -> Self {
        let mut out = Neighbours {
            offsets: Vec::with_capacity(per.len() + 1),
            ..Default::default()
        };
        out.offsets.push(0);
        for mut list in per {
            list.sort_unstable_by_key(|e| e.0);
            for (j, d, r) in list {
                out.index.push(j);
                out.rij.push(d);
                out.dist.push(r);
            }
            out.offsets.push(out.index.len());
        }
        out
    }

    pub fn from_grid(positions: &[Vec3], grid: &CellGrid, support: f64) -> Self {
        use rayon::prelude::*;
        let s2 = support * support;
        let per: Vec<Vec<(usize, Vec3, f64)>> = positions
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let mut list = Vec::with_capacity(48);
                for j in grid.candidates(p) {
                    if j == i {
                        continue;
                    }
                    let d = min_image(*p, positions[j], grid.box_l, grid.dims);
                    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    if r2 < s2 {
                        list.push((j, d, r2.sqrt()));
                    }
                }
                list
            })
            .collect();
        Self::assemble(per)
    }

    /// All-pairs search; the reference for the cell-list version.
    pub fn brute_force(positions: &[Vec3], box_l: f64, support: f64, dims: usize) -> Self {
        let s2 = support * support;
        let per = positions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut list = Vec::new();
                for (j, q) in positions.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let d = min_image(*p, *q, box_l, dims);
                    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    if r2 < s2 {
                        list.push((j, d, r2.sqrt()));
                    }
                }
                list
            })
            .collect();
        Self::assemble(per)
    }
}
