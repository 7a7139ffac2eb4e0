use std::collections::BTreeMap;
use std::sync::Arc;

use super::{relation_mismatches, synthesize, ConstraintMode, GenerationRequest, GenerationResult, SynthError, Violation};
use crate::relations::derive_relations;

pub const SOLVER_ID: &str = "solver";

/// Anything that can turn a request into a layout.
pub trait GenerationBackend: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult, SynthError>;
}

/// The deterministic band solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolverBackend;

impl GenerationBackend for SolverBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult, SynthError> {
        synthesize(req)
    }
}

impl<F> GenerationBackend for F
where
    F: Fn(&GenerationRequest) -> Result<GenerationResult, SynthError> + Send + Sync,
{
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult, SynthError> {
        self(req)
    }
}

/// Backends by id. Filled before serving, then only read.
#[derive(Clone, Default)]
pub struct BackendRegistry {
    backends: BTreeMap<String, Arc<dyn GenerationBackend>>,
}

impl std::fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.backends.keys()).finish()
    }
}

impl BackendRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// A registry holding only the solver.
    pub fn with_solver() -> Self {
        let mut r = Self::new();
        r.register(SOLVER_ID, Arc::new(SolverBackend)).expect("empty registry");
        r
    }

    pub fn register(&mut self, id: &str, backend: Arc<dyn GenerationBackend>) -> Result<(), SynthError> {
        if self.backends.contains_key(id) {
            return Err(SynthError::DuplicateBackend(id.to_string()));
        }
        self.backends.insert(id.to_string(), backend);
        Ok(())
    }

    pub fn ids(&self) -> Vec<String> {
        self.backends.keys().cloned().collect()
    }

    /// Runs the selected backend and checks its output against the request.
    pub fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult, SynthError> {
        let backend = self
            .backends
            .get(&req.backend)
            .ok_or_else(|| SynthError::UnknownBackend(req.backend.clone()))?;
        let result = backend.generate(req)?;
        check_contract(req, &result)?;
        Ok(result)
    }
}

/// Re-derives relations from a backend's layout and compares them with the
/// request, the reported relations and the fixed nodes.
pub fn check_contract(req: &GenerationRequest, result: &GenerationResult) -> Result<(), SynthError> {
    let violation = |mismatches: Vec<Violation>, altered_fixed: Vec<u32>| SynthError::ContractViolation {
        backend: req.backend.clone(),
        mismatches,
        altered_fixed,
    };
    if result.layout.len() < req.len() {
        return Err(violation(Vec::new(), Vec::new()));
    }
    let derived = derive_relations(&result.layout);
    let mut mismatches = relation_mismatches(&req.relations, &derived.leading(req.len()), req.mode);
    if mismatches.is_empty() && !derived.values_eq(&result.relations_out) {
        mismatches = relation_mismatches(&derived, &result.relations_out, ConstraintMode::Exact);
    }
    let altered: Vec<u32> = req
        .fixed_nodes
        .iter()
        .filter(|(id, node)| result.layout.node(**id) != Some(*node))
        .map(|(id, _)| *id)
        .collect();
    if !mismatches.is_empty() || !altered.is_empty() {
        return Err(violation(mismatches, altered));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthesize_random_layout;
    use crate::model::Canvas;
    use crate::relations::RelationMatrix;

    #[test]
    fn solver_is_selectable() {
        let g = synthesize_random_layout(8, 3).unwrap();
        let req = GenerationRequest::new(derive_relations(&g), g.canvas());
        let reg = BackendRegistry::with_solver();
        assert!(reg.generate(&req).is_ok());
    }

    #[test]
    fn unknown_and_duplicate_ids() {
        let mut reg = BackendRegistry::with_solver();
        let mut req = GenerationRequest::new(RelationMatrix::zeros(1), Canvas::RICO);
        req.backend = "llm".into();
        assert_eq!(reg.generate(&req).unwrap_err(), SynthError::UnknownBackend("llm".into()));
        assert_eq!(
            reg.register(SOLVER_ID, Arc::new(SolverBackend)).unwrap_err(),
            SynthError::DuplicateBackend(SOLVER_ID.into())
        );
    }

    #[test]
    fn lying_backend_is_caught() {
        let g = synthesize_random_layout(8, 3).unwrap();
        let other = synthesize_random_layout(8, 4).unwrap();
        let mut reg = BackendRegistry::with_solver();
        let fake = move |req: &GenerationRequest| {
            let mut res = synthesize(&GenerationRequest::new(derive_relations(&other), other.canvas()))?;
            res.relations_out = req.relations.clone();
            Ok(res)
        };
        reg.register("mock", Arc::new(fake)).unwrap();
        let mut req = GenerationRequest::new(derive_relations(&g), g.canvas());
        req.backend = "mock".into();
        assert!(matches!(
            reg.generate(&req),
            Err(SynthError::ContractViolation { .. })
        ));
    }
}
