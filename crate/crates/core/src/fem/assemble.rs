use super::SparseSystem;
use crate::error::{config_err, Error, Result};
use crate::mesh::{ElementGeometry, TriMesh};

/// Plane-strain constitutive matrix in Voigt form for unit Young's modulus,
/// acting on `(e_xx, e_yy, g_xy)` with engineering shear strain.
pub fn voigt_matrix(nu: f64) -> [[f64; 3]; 3] {
    let lam = nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = 1.0 / (2.0 * (1.0 + nu));
    [
        [lam + 2.0 * mu, lam, 0.0],
        [lam, lam + 2.0 * mu, 0.0],
        [0.0, 0.0, mu],
    ]
}

pub fn check_poisson(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu < 0.5) {
        return config_err(format!("Poisson ratio must lie in (0, 0.5), got {nu}"));
    }
    Ok(())
}

/// Strain `(e_xx, e_yy, g_xy)` of the element displacement, `u` interleaved as
/// `[u0x, u0y, u1x, u1y, u2x, u2y]`.
pub fn element_strain(g: &ElementGeometry, u: &[f64; 6]) -> [f64; 3] {
    let mut e = [0.0; 3];
    for a in 0..3 {
        let [bx, by] = g.grads[a];
        let (ux, uy) = (u[2 * a], u[2 * a + 1]);
        e[0] += bx * ux;
        e[1] += by * uy;
        e[2] += by * ux + bx * uy;
    }
    e
}

/// `e1^T D e2` for unit Young's modulus.
pub fn strain_energy_density(d: &[[f64; 3]; 3], e1: &[f64; 3], e2: &[f64; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += e1[i] * d[i][j] * e2[j];
        }
    }
    s
}

/// Gathers the six displacement components of element `e` from an interleaved vector.
pub fn element_displacement(mesh: &TriMesh, e: usize, u: &[f64]) -> [f64; 6] {
    let el = mesh.elements[e];
    let mut out = [0.0; 6];
    for a in 0..3 {
        out[2 * a] = u[2 * el[a]];
        out[2 * a + 1] = u[2 * el[a] + 1];
    }
    out
}

/// Element stiffness of `-div(k grad u)` with constant `k`.
pub fn scalar_element_matrix(g: &ElementGeometry, k: f64) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            m[a][b] = k * g.area * (g.grads[a][0] * g.grads[b][0] + g.grads[a][1] * g.grads[b][1]);
        }
    }
    m
}

/// Assembles `∫ k ∇u·∇v` with per-element coefficient `coeff`.
pub fn assemble_scalar_diffusion(mesh: &TriMesh, coeff: &[f64]) -> Result<SparseSystem> {
    if coeff.len() != mesh.num_elements() {
        return Err(Error::Assembly(format!(
            "expected {} element coefficients, got {}",
            mesh.num_elements(),
            coeff.len()
        )));
    }
    let mut t = Vec::with_capacity(9 * mesh.num_elements());
    for (e, (el, g)) in mesh.elements.iter().zip(mesh.geometries()).enumerate() {
        let k = coeff[e];
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Assembly(format!(
                "element {e} has nonpositive diffusivity {k}"
            )));
        }
        let m = scalar_element_matrix(g, k);
        for a in 0..3 {
            for b in 0..3 {
                t.push((el[a], el[b], m[a][b]));
            }
        }
    }
    Ok(SparseSystem::from_triplets(mesh.num_nodes(), t, true))
}

/// Element stiffness for linear elasticity with Young's modulus `young`.
pub fn elasticity_element_matrix(
    g: &ElementGeometry,
    d: &[[f64; 3]; 3],
    young: f64,
) -> [[f64; 6]; 6] {
    // B is 3x6
    let mut b = [[0.0; 6]; 3];
    for a in 0..3 {
        let [bx, by] = g.grads[a];
        b[0][2 * a] = bx;
        b[1][2 * a + 1] = by;
        b[2][2 * a] = by;
        b[2][2 * a + 1] = bx;
    }
    let mut db = [[0.0; 6]; 3];
    for i in 0..3 {
        for j in 0..6 {
            db[i][j] = (0..3).map(|k| d[i][k] * b[k][j]).sum();
        }
    }
    let mut k = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            k[i][j] = young * g.area * (0..3).map(|s| b[s][i] * db[s][j]).sum::<f64>();
        }
    }
    k
}

/// Assembles `∫ D ε(u):ε(v)` with per-element Young's modulus `young` and Poisson ratio `nu`.
/// Degrees of freedom are interleaved: `2 * node + component`.
pub fn assemble_elasticity(mesh: &TriMesh, young: &[f64], nu: f64) -> Result<SparseSystem> {
    check_poisson(nu)?;
    if young.len() != mesh.num_elements() {
        return Err(Error::Assembly(format!(
            "expected {} element stiffness values, got {}",
            mesh.num_elements(),
            young.len()
        )));
    }
    let d = voigt_matrix(nu);
    let mut t = Vec::with_capacity(36 * mesh.num_elements());
    for (e, (el, g)) in mesh.elements.iter().zip(mesh.geometries()).enumerate() {
        let ye = young[e];
        if !(ye > 0.0) || !ye.is_finite() {
            return Err(Error::Assembly(format!(
                "element {e} has nonpositive stiffness {ye}"
            )));
        }
        let k = elasticity_element_matrix(g, &d, ye);
        for a in 0..3 {
            for ca in 0..2 {
                for b in 0..3 {
                    for cb in 0..2 {
                        t.push((2 * el[a] + ca, 2 * el[b] + cb, k[2 * a + ca][2 * b + cb]));
                    }
                }
            }
        }
    }
    Ok(SparseSystem::from_triplets(2 * mesh.num_nodes(), t, true))
}

/// Diagonal of the row-sum lumped mass matrix weighted by a nodal density.
pub fn lumped_mass_diagonal(mesh: &TriMesh, density: &[f64]) -> Vec<f64> {
    assert_eq!(density.len(), mesh.num_nodes());
    mesh.node_mass()
        .iter()
        .zip(density)
        .map(|(m, d)| m * d)
        .collect()
}

/// Lumped mass matrix with nodal weights `density`.
pub fn assemble_lumped_mass(mesh: &TriMesh, density: &[f64]) -> Result<SparseSystem> {
    if density.len() != mesh.num_nodes() {
        return Err(Error::Assembly(format!(
            "expected {} nodal densities, got {}",
            mesh.num_nodes(),
            density.len()
        )));
    }
    if let Some(i) = density.iter().position(|d| !(*d >= 0.0)) {
        return Err(Error::Assembly(format!(
            "node {i} has negative density {}",
            density[i]
        )));
    }
    Ok(SparseSystem::from_diagonal(&lumped_mass_diagonal(
        mesh, density,
    )))
}

fn require_tag(mesh: &TriMesh, tag: &str) -> Result<()> {
    if !mesh.has_tag(tag) {
        return config_err(format!("no boundary edges carry tag `{tag}`"));
    }
    Ok(())
}

/// Load vector of a constant traction `t` on the edges tagged `tag`.
pub fn boundary_load(mesh: &TriMesh, tag: &str, t: [f64; 2]) -> Result<Vec<f64>> {
    require_tag(mesh, tag)?;
    let mut f = vec![0.0; 2 * mesh.num_nodes()];
    for edge in mesh.edges_with_tag(tag) {
        let half = 0.5 * mesh.edge_length(edge);
        for &n in &edge.nodes {
            f[2 * n] += t[0] * half;
            f[2 * n + 1] += t[1] * half;
        }
    }
    Ok(f)
}

/// Edge-lumped boundary mass `∫_Γ (K u)·v dσ` on the edges tagged `tag`.
///
/// This is the integral as it appears on the right-hand side of a spring
/// boundary condition; callers subtract it from the stiffness.
pub fn boundary_spring(mesh: &TriMesh, tag: &str, k: [[f64; 2]; 2]) -> Result<SparseSystem> {
    require_tag(mesh, tag)?;
    let mut t = Vec::new();
    for edge in mesh.edges_with_tag(tag) {
        let half = 0.5 * mesh.edge_length(edge);
        for &n in &edge.nodes {
            for r in 0..2 {
                for c in 0..2 {
                    if k[r][c] != 0.0 {
                        t.push((2 * n + r, 2 * n + c, half * k[r][c]));
                    }
                }
            }
        }
    }
    let symmetric = k[0][1] == k[1][0];
    Ok(SparseSystem::from_triplets(
        2 * mesh.num_nodes(),
        t,
        symmetric,
    ))
}
