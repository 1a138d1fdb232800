//! Benchmark problem definitions: meshes, per-case boundary conditions,
//! reference materials, and model construction from a configuration.

use super::config::{ExperimentConfig, ExperimentKind};
use crate::fem::mesh::{
    structured_plate, truss_chain, BCs, Dirichlet, EdgeTraction, LoadProtocol, Mesh, PlateGrid,
    PointLoad, TractionProfile,
};
use crate::io::read_checkpoint;
use crate::linalg::CholLayout;
use crate::model::{EqStressKind, Model, ModelKind, PlasticCfg, ScalingSpec};
use crate::net::{Activation, NetSpec};
use crate::reference::{linear_plane_stress, EPParams, HyperParams, RefMaterial};
use crate::{Error, Result};

const GPA: f64 = 1e9;
pub const PLATE_LX: f64 = 0.10;
pub const PLATE_LY: f64 = 0.05;
pub const PLATE_LZ: f64 = 0.001;

pub fn truss_material() -> EPParams {
    EPParams { e: 200.0 * GPA, nu: 0.0, sig_y: 0.3 * GPA, k: 200.0 / 9.0 * GPA }
}

pub fn plate_ep_material() -> EPParams {
    EPParams { e: 100.0 * GPA, nu: 0.35, sig_y: 0.97 * GPA, k: 10.0 * GPA }
}

pub fn hyper_material() -> HyperParams {
    HyperParams { c1: 0.1863e6, c2: 0.00979e6 }
}

pub fn fiber_material() -> (f64, f64) {
    (400.0 * GPA, 0.35) // SiC: E, ν
}

impl ExperimentConfig {
    pub fn dim(&self) -> usize {
        match self.kind {
            ExperimentKind::Truss => 1,
            _ => 3,
        }
    }

    /// Quad9 strain measure: Green-Lagrange for the hyperelastic plate
    /// (trusses are geometrically nonlinear regardless).
    pub fn finite_strain(&self) -> bool {
        matches!(self.kind, ExperimentKind::Truss | ExperimentKind::PlateHyperelastic)
    }

    /// The data-generation mesh (fiber: the fiber-resolved DNS mesh).
    pub fn generation_mesh(&self) -> Mesh {
        match self.kind {
            ExperimentKind::Truss => truss_chain(4, 1.0, 0.005, 8000.0),
            ExperimentKind::PlateHyperelastic => {
                let (nx, ny) = self.plate_res();
                structured_plate(nx, ny, PLATE_LX, PLATE_LY, PLATE_LZ, vec![800.0], |_, _| 0)
            }
            ExperimentKind::PlateElastoPlastic => {
                let (nx, ny) = self.plate_res();
                structured_plate(nx, ny, PLATE_LX, PLATE_LY, PLATE_LZ, vec![4200.0], |_, _| 0)
            }
            ExperimentKind::PlateFiber => {
                // Square fibers on a 10×10-element period, 5×5 elements each
                // (25 % volume fraction), matrix material id 0, fiber id 1.
                structured_plate(
                    self.dns_nx,
                    self.dns_ny,
                    PLATE_LX,
                    PLATE_LY,
                    PLATE_LZ,
                    vec![4200.0, 3200.0],
                    |ex, ey| {
                        let fx = ex % 10;
                        let fy = ey % 10;
                        usize::from((2..7).contains(&fx) && (2..7).contains(&fy))
                    },
                )
            }
        }
    }

    /// The mesh the constitutive model lives on: same as the generation mesh
    /// except for the fiber experiment, where it is the coarse homogenized
    /// plate with the volume-averaged density.
    pub fn surrogate_mesh(&self) -> Mesh {
        match self.kind {
            ExperimentKind::PlateFiber => {
                let rho = 0.75 * 4200.0 + 0.25 * 3200.0;
                structured_plate(self.nx, self.ny, PLATE_LX, PLATE_LY, PLATE_LZ, vec![rho], |_, _| 0)
            }
            _ => self.generation_mesh(),
        }
    }

    /// Maps surrogate-mesh nodes onto generation-mesh nodes (fiber case);
    /// identity for the other experiments.
    pub fn node_sampling(&self) -> Result<Vec<usize>> {
        match self.kind {
            ExperimentKind::PlateFiber => {
                let fine = PlateGrid::new(self.dns_nx, self.dns_ny);
                let coarse = PlateGrid::new(self.nx, self.ny);
                let sx = (fine.gx - 1) / (coarse.gx - 1);
                let sy = (fine.gy - 1) / (coarse.gy - 1);
                if sx * (coarse.gx - 1) != fine.gx - 1 || sy * (coarse.gy - 1) != fine.gy - 1 {
                    return Err(Error::Config(
                        "surrogate grid must subdivide the DNS grid (node sampling)".into(),
                    ));
                }
                let mut map = Vec::with_capacity(coarse.gx * coarse.gy);
                for j in 0..coarse.gy {
                    for i in 0..coarse.gx {
                        map.push(fine.node(i * sx, j * sy));
                    }
                }
                Ok(map)
            }
            _ => {
                let n = self.generation_mesh().n_nodes();
                Ok((0..n).collect())
            }
        }
    }

    /// Reference materials indexed by the mesh material ids.
    pub fn materials(&self) -> Result<Vec<RefMaterial>> {
        Ok(match self.kind {
            ExperimentKind::Truss => vec![RefMaterial::Ep1d(truss_material())],
            ExperimentKind::PlateHyperelastic => {
                vec![RefMaterial::RivlinSaunders(hyper_material())]
            }
            ExperimentKind::PlateElastoPlastic => vec![RefMaterial::EpPlane(plate_ep_material())],
            ExperimentKind::PlateFiber => {
                let (e, nu) = fiber_material();
                vec![
                    RefMaterial::EpPlane(plate_ep_material()),
                    RefMaterial::LinearElastic(linear_plane_stress(e, nu)?),
                ]
            }
        })
    }

    /// Load parameters `(p1, p2, p3)` of the plate protocols, after the
    /// linear-region scale factor.
    pub fn plate_loads(&self) -> (f64, f64, f64) {
        let (p1, p2, p3) = match self.kind {
            ExperimentKind::PlateHyperelastic => (44800.0, 4480.0, 16800.0),
            _ => (1.6 * GPA, 0.16 * GPA, 0.6 * GPA),
        };
        (p1 * self.load_scale, p2 * self.load_scale, p3 * self.load_scale)
    }

    pub fn all_cases(&self) -> Vec<String> {
        let mut v = self.train_cases.clone();
        v.extend(self.test_cases.iter().cloned());
        v
    }

    /// Boundary conditions of one loading case on a given mesh.
    pub fn case_bcs(&self, case: &str, mesh: &Mesh) -> Result<BCs> {
        match self.kind {
            ExperimentKind::Truss => {
                let tid: f64 = case
                    .strip_prefix("tid")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Config(format!("unknown truss case `{case}`")))?;
                let p = (0.4 * tid + 1.6) * 1e6 * self.load_scale;
                Ok(BCs {
                    dirichlet: vec![Dirichlet { node: 0, dof: 0, value: 0.0 }],
                    tractions: vec![],
                    point_loads: vec![PointLoad {
                        node: mesh.n_nodes() - 1,
                        dof: 0,
                        amplitude: p,
                    }],
                    body_force: None,
                })
            }
            _ => self.plate_case_bcs(case, mesh),
        }
    }

    fn plate_case_bcs(&self, case: &str, mesh: &Mesh) -> Result<BCs> {
        let (p1, p2, p3) = self.plate_loads();
        let gx = (1..)
            .find(|&g| g * g >= mesh.n_nodes())
            .map(|_| 0)
            .unwrap_or(0);
        let _ = gx;
        // Recover the structured grid from the mesh size.
        let n_nodes = mesh.n_nodes();
        let (nx, ny) = {
            // n_nodes = (2nx+1)(2ny+1) with lx/ly = 2 aspect ratio in elements.
            let mut found = None;
            for ny in 1..=400 {
                let gy = 2 * ny + 1;
                if n_nodes % gy == 0 {
                    let gx = n_nodes / gy;
                    if gx % 2 == 1 && gx >= 3 {
                        let nx = (gx - 1) / 2;
                        if nx * mesh.kind.nodes_per_elem() > 0 && nx * ny == mesh.n_elems() {
                            found = Some((nx, ny));
                            break;
                        }
                    }
                }
            }
            found.ok_or_else(|| Error::Config("plate mesh is not a structured grid".into()))?
        };
        let grid = PlateGrid::new(nx, ny);
        let sq = std::f64::consts::SQRT_2;
        let (clamp_nodes, load_nodes, profile): (Vec<usize>, Vec<usize>, TractionProfile) =
            match case {
                "A1" => (grid.bottom(), grid.top(), TractionProfile::Uniform([0.0, p1])),
                "A2" => (grid.bottom(), grid.top(), TractionProfile::Uniform([0.0, -p1])),
                "A3" => (grid.bottom(), grid.top(), TractionProfile::Uniform([p3, 0.0])),
                "A4" => (grid.bottom(), grid.top(), TractionProfile::Uniform([-p3, 0.0])),
                "A5" => (
                    grid.bottom(),
                    grid.top(),
                    TractionProfile::Uniform([p3 / sq, p1 / sq]),
                ),
                "A6" => (grid.bottom(), grid.top(), TractionProfile::Uniform([0.75 * p3, 0.0])),
                "B1" => (grid.left(), grid.right(), TractionProfile::Uniform([p1, 0.0])),
                "B2" => (grid.left(), grid.right(), TractionProfile::Uniform([-p1, 0.0])),
                "B3" => (grid.left(), grid.right(), TractionProfile::Uniform([0.0, p2])),
                "B4" => (grid.left(), grid.right(), TractionProfile::Uniform([0.0, -p2])),
                "B5" => (
                    grid.left(),
                    grid.right(),
                    TractionProfile::Uniform([p1 / sq, p2 / sq]),
                ),
                "B6" => (grid.left(), grid.right(), TractionProfile::Uniform([0.0, 0.75 * p2])),
                "C1" => {
                    let sigma_x = 0.2 * PLATE_LX;
                    let coeff = p2 * PLATE_LX / ((2.0 * std::f64::consts::PI).sqrt() * sigma_x);
                    (
                        grid.left(),
                        grid.bottom(),
                        TractionProfile::GaussianY {
                            coeff,
                            x0: 5.0 * PLATE_LX / 6.0,
                            sigma: sigma_x,
                        },
                    )
                }
                other => return Err(Error::Config(format!("unknown plate case `{other}`"))),
            };
        let mut dirichlet = Vec::new();
        for n in clamp_nodes {
            dirichlet.push(Dirichlet { node: n, dof: 0, value: 0.0 });
            dirichlet.push(Dirichlet { node: n, dof: 1, value: 0.0 });
        }
        let tractions = PlateGrid::edges(&load_nodes)
            .into_iter()
            .map(|nodes| EdgeTraction { nodes, profile: profile.clone() })
            .collect();
        Ok(BCs { dirichlet, tractions, point_loads: vec![], body_force: None })
    }

    pub fn protocol(&self, case: &str) -> Result<LoadProtocol> {
        LoadProtocol::new(self.t_total, case)
    }

    /// Builds the constitutive model described by the `[model]` section.
    pub fn build_model(&self) -> Result<Model> {
        let dim = self.dim();
        let layout = if dim == 1 {
            CholLayout::Dim1
        } else {
            CholLayout::parse(&self.model.layout)?
        };
        let scaling = ScalingSpec { eps_ref: self.model.eps_ref, sig_ref: self.model.sig_ref };
        let activation = Activation::parse(&self.model.activation)?;
        let n_chol = layout.entry_count();
        let (kind, net) = match self.model.kind.as_str() {
            "linear" => (ModelKind::LinearElastic, None),
            "spd" => {
                let spec =
                    NetSpec::mlp(dim, self.model.depth, self.model.width, n_chol, activation, 0);
                (ModelKind::SpdElastic, Some(spec))
            }
            "spd-ep" => {
                let spec = NetSpec::mlp(
                    3 * dim,
                    self.model.depth,
                    self.model.width,
                    n_chol,
                    activation,
                    0,
                );
                let lin_chol = self.linear_branch_chol(layout, &scaling)?;
                let cfg = PlasticCfg {
                    sigy_est: self.model.sigy_est,
                    d: self.model.d,
                    eq_kind: if dim == 1 { EqStressKind::Abs } else { EqStressKind::VonMisesPlane },
                    lin_chol,
                };
                (ModelKind::SpdElastoPlastic(cfg), Some(spec))
            }
            "sigma" | "dsigma" => {
                let spec = NetSpec::mlp(
                    3 * dim,
                    self.model.depth,
                    self.model.width,
                    dim,
                    activation,
                    0,
                );
                let kind = if self.model.kind == "sigma" {
                    ModelKind::SigmaNn
                } else {
                    ModelKind::DeltaSigmaNn
                };
                (kind, Some(spec))
            }
            other => return Err(Error::Config(format!("unknown model kind `{other}`"))),
        };
        Model::new(kind, dim, layout, net, scaling)
    }

    /// Fixed Cholesky factor of the blended model's linear branch: loaded
    /// from an identified linear checkpoint when `lin_from` is set, otherwise
    /// derived from the known reference elastic constants.
    fn linear_branch_chol(&self, layout: CholLayout, scaling: &ScalingSpec) -> Result<Vec<f64>> {
        if let Some(path) = &self.model.lin_from {
            let (m, theta) = read_checkpoint(path)?;
            if !matches!(m.kind, ModelKind::LinearElastic) || m.layout != layout {
                return Err(Error::Config(
                    "lin_from checkpoint must hold a linear model with a matching layout".into(),
                ));
            }
            // Rescale the stored entries to this model's tangent units.
            let factor = (m.scaling.stiffness() / scaling.stiffness()).sqrt();
            return Ok(theta.iter().map(|v| v * factor).collect());
        }
        match self.kind {
            ExperimentKind::Truss => {
                let e = truss_material().e / scaling.stiffness();
                Ok(vec![e.sqrt()])
            }
            ExperimentKind::PlateElastoPlastic => {
                let p = plate_ep_material();
                let c = linear_plane_stress(p.e, p.nu)?.scale(1.0 / scaling.stiffness());
                // Cholesky entries of the orthotropic block.
                let l11 = c.get(0, 0).sqrt();
                let l21 = c.get(1, 0) / l11;
                let l22 = (c.get(1, 1) - l21 * l21).sqrt();
                let l33 = c.get(2, 2).sqrt();
                Ok(vec![l11, l21, l22, l33])
            }
            _ => Err(Error::Config(
                "spd-ep needs `lin_from` for this experiment (no known linear branch)".into(),
            )),
        }
    }
}
