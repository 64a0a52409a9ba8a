use std::collections::BTreeMap;
use std::sync::Arc;

use super::{generate_octag, generate_voronoi, PolyMesh};
use crate::error::{Error, Result};

/// A parameterized sequence of meshes. `size` is the family's own
/// resolution parameter (grid subdivisions, number of cells, ...).
pub trait MeshFamily: Send + Sync {
    fn name(&self) -> &'static str;

    fn generate(&self, size: usize, seed: u64) -> Result<PolyMesh>;

    /// Default refinement ladder, coarse to fine.
    fn default_ladder(&self) -> Vec<usize>;
}

#[derive(Debug, Clone)]
pub struct OctagFamily {
    pub perturb: f64,
}

impl Default for OctagFamily {
    fn default() -> Self {
        OctagFamily { perturb: 0.1 }
    }
}

impl MeshFamily for OctagFamily {
    fn name(&self) -> &'static str {
        "octag"
    }

    fn generate(&self, n: usize, seed: u64) -> Result<PolyMesh> {
        generate_octag(n, self.perturb, seed)
    }

    fn default_ladder(&self) -> Vec<usize> {
        vec![4, 8, 16, 32]
    }
}

#[derive(Debug, Clone)]
pub struct VoronoiFamily {
    pub lloyd_iters: usize,
}

impl Default for VoronoiFamily {
    fn default() -> Self {
        VoronoiFamily { lloyd_iters: 3 }
    }
}

impl MeshFamily for VoronoiFamily {
    fn name(&self) -> &'static str {
        "voro"
    }

    fn generate(&self, cells: usize, seed: u64) -> Result<PolyMesh> {
        generate_voronoi(cells, self.lloyd_iters, seed)
    }

    fn default_ladder(&self) -> Vec<usize> {
        vec![64, 256, 1024, 4096]
    }
}

/// Mesh families selectable by name.
#[derive(Clone)]
pub struct MeshRegistry {
    families: BTreeMap<&'static str, Arc<dyn MeshFamily>>,
}

impl MeshRegistry {
    pub fn empty() -> Self {
        MeshRegistry {
            families: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, family: Arc<dyn MeshFamily>) {
        self.families.insert(family.name(), family);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn MeshFamily>> {
        self.families.get(name).cloned().ok_or_else(|| Error::Unknown {
            kind: "mesh family",
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.families.keys().copied().collect()
    }
}

impl Default for MeshRegistry {
    fn default() -> Self {
        let mut r = MeshRegistry::empty();
        r.register(Arc::new(OctagFamily::default()));
        r.register(Arc::new(VoronoiFamily::default()));
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_by_name() {
        let r = MeshRegistry::default();
        assert_eq!(r.names(), vec!["octag", "voro"]);
        let m = r.get("octag").unwrap().generate(2, 1).unwrap();
        assert_eq!(m.num_cells(), 8);
        assert!(matches!(r.get("quads"), Err(Error::Unknown { .. })));
    }
}
