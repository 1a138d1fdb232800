//! Mesh and boundary-condition types plus the plain-text mesh file format.
//!
//! File grammar (whitespace-separated, `#` starts a comment line):
//!
//! ```text
//! mesh truss2|quad9
//! nodes <n>
//! <x> [<y>]          # one line per node, ndim coordinates
//! elements <m>
//! <mat_id> <n0> ... <nk>
//! rho <count> <rho_0> ...
//! thickness <t>      # plate thickness L_z, or truss cross-section area
//! dirichlet <k>
//! <node> <dof> <value>
//! traction <k>
//! uniform <n0> <n1> <n2> <tx> <ty>
//! gauss-y <n0> <n1> <n2> <coeff> <x0> <sigma>
//! pointload <k>
//! <node> <dof> <amplitude>
//! end
//! ```

use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    /// Geometric nonlinear two-node truss, one axial dof per node.
    Truss2,
    /// 9-node biquadratic quadrilateral, two dofs per node.
    Quad9,
}

impl ElementKind {
    pub fn ndim(&self) -> usize {
        match self {
            ElementKind::Truss2 => 1,
            ElementKind::Quad9 => 2,
        }
    }

    pub fn nodes_per_elem(&self) -> usize {
        match self {
            ElementKind::Truss2 => 2,
            ElementKind::Quad9 => 9,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ElementKind::Truss2 => "truss2",
            ElementKind::Quad9 => "quad9",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub kind: ElementKind,
    /// Node coordinates, ndim-interleaved.
    pub coords: Vec<f64>,
    /// Element connectivity, `nodes_per_elem`-strided.
    pub conn: Vec<usize>,
    /// Material id per element, indexing `rho` and the material table.
    pub mat_ids: Vec<usize>,
    /// Density per material id (kg/m³).
    pub rho: Vec<f64>,
    /// Plate thickness L_z (m) for quad9, cross-section area A (m²) for truss.
    pub thickness: f64,
}

impl Mesh {
    pub fn ndim(&self) -> usize {
        self.kind.ndim()
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len() / self.ndim()
    }

    pub fn n_elems(&self) -> usize {
        self.mat_ids.len()
    }

    pub fn ndof(&self) -> usize {
        self.n_nodes() * self.ndim()
    }

    pub fn gauss_per_elem(&self) -> usize {
        match self.kind {
            ElementKind::Truss2 => 1,
            ElementKind::Quad9 => 9,
        }
    }

    pub fn n_gauss(&self) -> usize {
        self.n_elems() * self.gauss_per_elem()
    }

    pub fn elem_nodes(&self, e: usize) -> &[usize] {
        let k = self.kind.nodes_per_elem();
        &self.conn[e * k..(e + 1) * k]
    }

    pub fn node_coord(&self, n: usize, d: usize) -> f64 {
        self.coords[n * self.ndim() + d]
    }

    /// Global dof indices of an element, node-major.
    pub fn elem_dofs(&self, e: usize, out: &mut Vec<usize>) {
        out.clear();
        let nd = self.ndim();
        for &n in self.elem_nodes(e) {
            for d in 0..nd {
                out.push(n * nd + d);
            }
        }
    }

    /// Half bandwidth of the assembled system (max dof distance inside any
    /// element).
    pub fn half_bandwidth(&self) -> usize {
        let nd = self.ndim();
        let mut band = 0;
        for e in 0..self.n_elems() {
            let nodes = self.elem_nodes(e);
            let lo = nodes.iter().min().unwrap();
            let hi = nodes.iter().max().unwrap();
            band = band.max((hi - lo + 1) * nd - 1);
        }
        band
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.kind.nodes_per_elem();
        if self.conn.len() != self.mat_ids.len() * k {
            return Err(Error::Data("connectivity length does not match element count".into()));
        }
        if self.coords.len() % self.ndim() != 0 {
            return Err(Error::Data("coordinate array length not divisible by ndim".into()));
        }
        let n = self.n_nodes();
        if self.conn.iter().any(|&i| i >= n) {
            return Err(Error::Data("element references a node out of range".into()));
        }
        if self.mat_ids.iter().any(|&m| m >= self.rho.len()) {
            return Err(Error::Data("material id out of range of density table".into()));
        }
        if !(self.thickness > 0.0) {
            return Err(Error::Data("thickness/area must be positive".into()));
        }
        Ok(())
    }
}

/// Spatial profile of an edge traction; both are scaled in time by the load
/// protocol. Magnitudes are surface tractions in Pa (force integrals pick up
/// the thickness).
#[derive(Clone, Debug, PartialEq)]
pub enum TractionProfile {
    Uniform([f64; 2]),
    /// y-directed traction `coeff · exp(−(x−x0)²/σ²)`.
    GaussianY { coeff: f64, x0: f64, sigma: f64 },
}

/// A loaded quadratic edge of a quad9 element: (end, mid, end) node ids.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeTraction {
    pub nodes: [usize; 3],
    pub profile: TractionProfile,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dirichlet {
    pub node: usize,
    pub dof: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointLoad {
    pub node: usize,
    pub dof: usize,
    pub amplitude: f64,
}

#[derive(Clone, Debug, Default)]
pub struct BCs {
    pub dirichlet: Vec<Dirichlet>,
    pub tractions: Vec<EdgeTraction>,
    pub point_loads: Vec<PointLoad>,
    /// Constant body force per unit mass (N/kg), not scaled by the protocol.
    pub body_force: Option<[f64; 2]>,
}

impl BCs {
    /// Mask of constrained dofs.
    pub fn dirichlet_mask(&self, mesh: &Mesh) -> Vec<bool> {
        let mut mask = vec![false; mesh.ndof()];
        for d in &self.dirichlet {
            mask[d.node * mesh.ndim() + d.dof] = true;
        }
        mask
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let nd = mesh.ndim();
        let n = mesh.n_nodes();
        for d in &self.dirichlet {
            if d.node >= n || d.dof >= nd {
                return Err(Error::Data("Dirichlet entry out of range".into()));
            }
        }
        for p in &self.point_loads {
            if p.node >= n || p.dof >= nd {
                return Err(Error::Data("point load out of range".into()));
            }
        }
        let mask = self.dirichlet_mask(mesh);
        for t in &self.tractions {
            for &node in &t.nodes {
                if node >= n {
                    return Err(Error::Data("traction edge node out of range".into()));
                }
                // Traction and Dirichlet supports must not overlap.
                for d in 0..nd {
                    if mask[node * nd + d] {
                        return Err(Error::Data(format!(
                            "node {node} carries both traction and Dirichlet constraints"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Time shape of the external load: `t̄(t) = spatial · sin(π t / T)`.
#[derive(Clone, Debug)]
pub struct LoadProtocol {
    pub t_total: f64,
    pub label: String,
}

impl LoadProtocol {
    pub fn new(t_total: f64, label: impl Into<String>) -> Result<Self> {
        if !(t_total > 0.0) {
            return Err(Error::Config("total time must be positive".into()));
        }
        Ok(LoadProtocol { t_total, label: label.into() })
    }

    pub fn factor(&self, t: f64) -> f64 {
        (std::f64::consts::PI * t / self.t_total).sin()
    }
}

/// Structured nx × ny quad9 plate on [0, lx] × [0, ly]. Node grid is
/// (2nx+1) × (2ny+1), row-major with x fastest; per-element material ids
/// come from `mat_id(ex, ey)`.
pub fn structured_plate(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    lz: f64,
    rho: Vec<f64>,
    mat_id: impl Fn(usize, usize) -> usize,
) -> Mesh {
    let (gx, gy) = (2 * nx + 1, 2 * ny + 1);
    let mut coords = Vec::with_capacity(gx * gy * 2);
    for j in 0..gy {
        for i in 0..gx {
            coords.push(lx * i as f64 / (gx - 1) as f64);
            coords.push(ly * j as f64 / (gy - 1) as f64);
        }
    }
    let node = |i: usize, j: usize| j * gx + i;
    let mut conn = Vec::with_capacity(nx * ny * 9);
    let mut mat_ids = Vec::with_capacity(nx * ny);
    for ey in 0..ny {
        for ex in 0..nx {
            let (i0, j0) = (2 * ex, 2 * ey);
            conn.extend_from_slice(&[
                node(i0, j0),
                node(i0 + 2, j0),
                node(i0 + 2, j0 + 2),
                node(i0, j0 + 2),
                node(i0 + 1, j0),
                node(i0 + 2, j0 + 1),
                node(i0 + 1, j0 + 2),
                node(i0, j0 + 1),
                node(i0 + 1, j0 + 1),
            ]);
            mat_ids.push(mat_id(ex, ey));
        }
    }
    Mesh { kind: ElementKind::Quad9, coords, conn, mat_ids, rho, thickness: lz }
}

/// Chain of axial truss elements along x, each of length `elem_len`.
pub fn truss_chain(n_elems: usize, elem_len: f64, area: f64, rho: f64) -> Mesh {
    let coords = (0..=n_elems).map(|i| i as f64 * elem_len).collect();
    let mut conn = Vec::with_capacity(2 * n_elems);
    for e in 0..n_elems {
        conn.push(e);
        conn.push(e + 1);
    }
    Mesh {
        kind: ElementKind::Truss2,
        coords,
        conn,
        mat_ids: vec![0; n_elems],
        rho: vec![rho],
        thickness: area,
    }
}

/// Node grid helpers for structured plates.
pub struct PlateGrid {
    pub gx: usize,
    pub gy: usize,
}

impl PlateGrid {
    pub fn new(nx: usize, ny: usize) -> Self {
        PlateGrid { gx: 2 * nx + 1, gy: 2 * ny + 1 }
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.gx + i
    }

    pub fn bottom(&self) -> Vec<usize> {
        (0..self.gx).map(|i| self.node(i, 0)).collect()
    }

    pub fn top(&self) -> Vec<usize> {
        (0..self.gx).map(|i| self.node(i, self.gy - 1)).collect()
    }

    pub fn left(&self) -> Vec<usize> {
        (0..self.gy).map(|j| self.node(0, j)).collect()
    }

    pub fn right(&self) -> Vec<usize> {
        (0..self.gy).map(|j| self.node(self.gx - 1, j)).collect()
    }

    /// Consecutive quadratic edges (end, mid, end) along a boundary node list.
    pub fn edges(nodes: &[usize]) -> Vec<[usize; 3]> {
        (0..(nodes.len() - 1) / 2)
            .map(|k| [nodes[2 * k], nodes[2 * k + 1], nodes[2 * k + 2]])
            .collect()
    }
}

pub fn write_mesh_string(mesh: &Mesh, bcs: &BCs) -> String {
    let mut s = String::new();
    let nd = mesh.ndim();
    let _ = writeln!(s, "mesh {}", mesh.kind.name());
    let _ = writeln!(s, "nodes {}", mesh.n_nodes());
    for i in 0..mesh.n_nodes() {
        for d in 0..nd {
            if d > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{}", mesh.node_coord(i, d));
        }
        s.push('\n');
    }
    let _ = writeln!(s, "elements {}", mesh.n_elems());
    for e in 0..mesh.n_elems() {
        let _ = write!(s, "{}", mesh.mat_ids[e]);
        for &n in mesh.elem_nodes(e) {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
    }
    let _ = write!(s, "rho {}", mesh.rho.len());
    for r in &mesh.rho {
        let _ = write!(s, " {r}");
    }
    s.push('\n');
    let _ = writeln!(s, "thickness {}", mesh.thickness);
    let _ = writeln!(s, "dirichlet {}", bcs.dirichlet.len());
    for d in &bcs.dirichlet {
        let _ = writeln!(s, "{} {} {}", d.node, d.dof, d.value);
    }
    let _ = writeln!(s, "traction {}", bcs.tractions.len());
    for t in &bcs.tractions {
        match &t.profile {
            TractionProfile::Uniform(v) => {
                let _ = writeln!(
                    s,
                    "uniform {} {} {} {} {}",
                    t.nodes[0], t.nodes[1], t.nodes[2], v[0], v[1]
                );
            }
            TractionProfile::GaussianY { coeff, x0, sigma } => {
                let _ = writeln!(
                    s,
                    "gauss-y {} {} {} {} {} {}",
                    t.nodes[0], t.nodes[1], t.nodes[2], coeff, x0, sigma
                );
            }
        }
    }
    let _ = writeln!(s, "pointload {}", bcs.point_loads.len());
    for p in &bcs.point_loads {
        let _ = writeln!(s, "{} {} {}", p.node, p.dof, p.amplitude);
    }
    s.push_str("end\n");
    s
}

pub fn write_mesh_file(path: &Path, mesh: &Mesh, bcs: &BCs) -> Result<()> {
    std::fs::write(path, write_mesh_string(mesh, bcs))?;
    Ok(())
}

struct Tokens<'a> {
    items: std::vec::IntoIter<&'a str>,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items: Vec<&str> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace())
            .collect();
        Tokens { items: items.into_iter() }
    }

    fn word(&mut self) -> Result<&'a str> {
        self.items.next().ok_or_else(|| Error::Data("unexpected end of mesh file".into()))
    }

    fn usize(&mut self) -> Result<usize> {
        let w = self.word()?;
        w.parse().map_err(|_| Error::Data(format!("expected integer, got `{w}`")))
    }

    fn f64(&mut self) -> Result<f64> {
        let w = self.word()?;
        w.parse().map_err(|_| Error::Data(format!("expected number, got `{w}`")))
    }

    fn expect(&mut self, kw: &str) -> Result<()> {
        let w = self.word()?;
        if w != kw {
            return Err(Error::Data(format!("expected `{kw}`, got `{w}`")));
        }
        Ok(())
    }
}

pub fn parse_mesh_string(text: &str) -> Result<(Mesh, BCs)> {
    let mut t = Tokens::new(text);
    t.expect("mesh")?;
    let kind = match t.word()? {
        "truss2" => ElementKind::Truss2,
        "quad9" => ElementKind::Quad9,
        other => return Err(Error::Data(format!("unknown element kind `{other}`"))),
    };
    t.expect("nodes")?;
    let n_nodes = t.usize()?;
    let nd = kind.ndim();
    let mut coords = Vec::with_capacity(n_nodes * nd);
    for _ in 0..n_nodes * nd {
        coords.push(t.f64()?);
    }
    t.expect("elements")?;
    let n_elems = t.usize()?;
    let k = kind.nodes_per_elem();
    let mut conn = Vec::with_capacity(n_elems * k);
    let mut mat_ids = Vec::with_capacity(n_elems);
    for _ in 0..n_elems {
        mat_ids.push(t.usize()?);
        for _ in 0..k {
            conn.push(t.usize()?);
        }
    }
    t.expect("rho")?;
    let n_rho = t.usize()?;
    let mut rho = Vec::with_capacity(n_rho);
    for _ in 0..n_rho {
        rho.push(t.f64()?);
    }
    t.expect("thickness")?;
    let thickness = t.f64()?;
    t.expect("dirichlet")?;
    let n_d = t.usize()?;
    let mut dirichlet = Vec::with_capacity(n_d);
    for _ in 0..n_d {
        dirichlet.push(Dirichlet { node: t.usize()?, dof: t.usize()?, value: t.f64()? });
    }
    t.expect("traction")?;
    let n_t = t.usize()?;
    let mut tractions = Vec::with_capacity(n_t);
    for _ in 0..n_t {
        match t.word()? {
            "uniform" => {
                let nodes = [t.usize()?, t.usize()?, t.usize()?];
                let v = [t.f64()?, t.f64()?];
                tractions.push(EdgeTraction { nodes, profile: TractionProfile::Uniform(v) });
            }
            "gauss-y" => {
                let nodes = [t.usize()?, t.usize()?, t.usize()?];
                let coeff = t.f64()?;
                let x0 = t.f64()?;
                let sigma = t.f64()?;
                tractions.push(EdgeTraction {
                    nodes,
                    profile: TractionProfile::GaussianY { coeff, x0, sigma },
                });
            }
            other => return Err(Error::Data(format!("unknown traction profile `{other}`"))),
        }
    }
    t.expect("pointload")?;
    let n_p = t.usize()?;
    let mut point_loads = Vec::with_capacity(n_p);
    for _ in 0..n_p {
        point_loads.push(PointLoad { node: t.usize()?, dof: t.usize()?, amplitude: t.f64()? });
    }
    t.expect("end")?;
    let mesh = Mesh { kind, coords, conn, mat_ids, rho, thickness };
    mesh.validate()?;
    let bcs = BCs { dirichlet, tractions, point_loads, body_force: None };
    bcs.validate(&mesh)?;
    Ok((mesh, bcs))
}

pub fn read_mesh_file(path: &Path) -> Result<(Mesh, BCs)> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh_string(&text)
}
