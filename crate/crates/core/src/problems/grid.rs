//! Staggered-grid bookkeeping for the velocity (flux) unknowns.
//!
//! Each velocity component lives on its own tensor grid. Along an axis an
//! unknown is either `Node`-centered (interior grid lines `1..N-1`, with the
//! Dirichlet wall values eliminated) or `Cell`-centered (`0..N-1`, walls
//! half a cell away handled by ghost reflection).

use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Centering {
    Node,
    Cell,
}

impl Centering {
    pub fn count(self, cells: usize) -> usize {
        match self {
            Centering::Node => cells - 1,
            Centering::Cell => cells,
        }
    }

    /// First physical index along the axis.
    fn first(self) -> usize {
        match self {
            Centering::Node => 1,
            Centering::Cell => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentGrid {
    pub x: Centering,
    pub y: Centering,
}

impl ComponentGrid {
    pub fn len(&self, cells: usize) -> usize {
        self.x.count(cells) * self.y.count(cells)
    }

    pub fn is_empty(&self, cells: usize) -> bool {
        self.len(cells) == 0
    }
}

/// Layout of the A-block unknowns of a grid-based saddle system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    pub cells: usize,
    pub components: Vec<ComponentGrid>,
}

impl GridLayout {
    /// u on vertical faces, v on horizontal faces.
    pub fn mac(cells: usize) -> Self {
        Self {
            cells,
            components: vec![
                ComponentGrid { x: Centering::Node, y: Centering::Cell },
                ComponentGrid { x: Centering::Cell, y: Centering::Node },
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.components.iter().map(|c| c.len(self.cells)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn offset(&self, component: usize) -> usize {
        self.components[..component].iter().map(|c| c.len(self.cells)).sum()
    }

    /// Global index of the unknown at physical position `(i, j)` of a component,
    /// or `None` if that position is a wall.
    pub fn index(&self, component: usize, i: isize, j: isize) -> Option<usize> {
        let c = self.components[component];
        let ix = local(c.x, self.cells, i)?;
        let iy = local(c.y, self.cells, j)?;
        Some(self.offset(component) + iy * c.x.count(self.cells) + ix)
    }

    /// Physical positions `(component, i, j)` in global index order.
    pub fn positions(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.len());
        for (k, c) in self.components.iter().enumerate() {
            for jy in 0..c.y.count(self.cells) {
                for ix in 0..c.x.count(self.cells) {
                    out.push((k, ix + c.x.first(), jy + c.y.first()));
                }
            }
        }
        out
    }

    /// Same layout on a grid with half as many cells.
    pub fn coarsen(&self) -> Option<Self> {
        if self.cells % 2 != 0 || self.cells < 4 {
            return None;
        }
        Some(Self { cells: self.cells / 2, components: self.components.clone() })
    }

    /// Linear interpolation from `self.coarsen()` to `self`, dimensions
    /// `self.len() × coarse.len()`. Node axes use (½, 1, ½) weights, cell axes
    /// use (¼, ¾) weights with odd reflection at the walls.
    pub fn prolongation(&self) -> Option<DMatrix<f64>> {
        let coarse = self.coarsen()?;
        let mut p = DMatrix::zeros(self.len(), coarse.len());
        for (row, (k, i, j)) in self.positions().into_iter().enumerate() {
            let c = self.components[k];
            for (ci, wx) in axis_weights(c.x, coarse.cells, i) {
                for (cj, wy) in axis_weights(c.y, coarse.cells, j) {
                    if let Some(col) = coarse.index(k, ci, cj) {
                        p[(row, col)] += wx * wy;
                    }
                }
            }
        }
        Some(p)
    }
}

fn local(c: Centering, cells: usize, i: isize) -> Option<usize> {
    let first = c.first() as isize;
    let idx = i - first;
    if idx < 0 || idx >= c.count(cells) as isize {
        None
    } else {
        Some(idx as usize)
    }
}

/// Coarse positions and weights contributing to fine position `i`. Wall
/// contributions are dropped (node) or reflected with a sign flip (cell).
fn axis_weights(c: Centering, coarse_cells: usize, i: usize) -> Vec<(isize, f64)> {
    let i = i as isize;
    match c {
        Centering::Node => {
            if i % 2 == 0 {
                vec![(i / 2, 1.0)]
            } else {
                vec![((i - 1) / 2, 0.5), ((i + 1) / 2, 0.5)]
            }
        }
        Centering::Cell => {
            let near = i / 2;
            let far = if i % 2 == 0 { near - 1 } else { near + 1 };
            let mut out = vec![(near, 0.75)];
            if far < 0 || far >= coarse_cells as isize {
                // ghost value is the negated mirror of the nearest cell
                out[0].1 -= 0.25;
            } else {
                out.push((far, 0.25));
            }
            out
        }
    }
}
