use crate::error::{Error, Result};
use crate::microgen::PhaseField;
use crate::tensor::OrthogonalMatrix;

/// `F'(x) = F(Qᵀ x)` about the cell center, for signed permutation matrices `Q`.
pub fn transform_field(field: &PhaseField, q: &OrthogonalMatrix) -> Result<PhaseField> {
    let m = q.matrix();
    // for output axis a: source axis src[a] and whether it is reversed
    let mut src = [0usize; 3];
    let mut flip = [false; 3];
    for a in 0..3 {
        let mut found = None;
        for b in 0..3 {
            let v = m[(b, a)];
            if (v.abs() - 1.0).abs() < 1e-12 {
                if found.is_some() {
                    return Err(unsupported(q));
                }
                found = Some((b, v < 0.0));
            } else if v.abs() > 1e-12 {
                return Err(unsupported(q));
            }
        }
        let (b, f) = found.ok_or_else(|| unsupported(q))?;
        src[a] = b;
        flip[a] = f;
    }
    // (Qᵀ y)_a = ±y_{src[a]}; new voxel at y reads old voxel at Qᵀ y
    let n = field.n;
    let mut out = vec![0u8; field.phases.len()];
    let mut idx_new = [0usize; 3];
    for k in 0..n {
        idx_new[2] = k;
        for j in 0..n {
            idx_new[1] = j;
            for i in 0..n {
                idx_new[0] = i;
                let mut old = [0usize; 3];
                for a in 0..3 {
                    let v = idx_new[src[a]];
                    old[a] = if flip[a] { n - 1 - v } else { v };
                }
                out[field.index(i, j, k)] = field.phases[field.index(old[0], old[1], old[2])];
            }
        }
    }
    PhaseField::new(n, field.h, out, field.conductivities.clone())
}

fn unsupported(q: &OrthogonalMatrix) -> Error {
    Error::UnsupportedTransform(format!(
        "only voxel-exact signed permutations are supported, got {:?}",
        q.matrix()
    ))
}
