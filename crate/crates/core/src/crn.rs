//! Chemical reaction networks: parsing, stoichiometry, conservation laws,
//! and the strongly connected component structure of the complex graph.
//!
//! A network is a list of species, a list of complexes (formal nonnegative
//! combinations of species appearing as reactant or product), and a list of
//! directed reactions between complexes, each carrying a rate constant `beta`
//! and the identifier of the spatial profile its rate scales with. After
//! construction the reactions are relabeled so that the reactions of each
//! strongly connected component occupy a contiguous index range.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use thiserror::Error;

use crate::linalg;

/// Tolerance for comparing two complexes coefficient-by-coefficient.
pub const COMPLEX_EQ_TOL: f64 = 1e-12;

/// Tolerance for the kernel computation behind the conservation basis.
pub const KERNEL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: rate constant must be positive, got {beta}")]
    NonPositiveBeta { line: usize, beta: f64 },
    #[error("line {line}: reactant and product complexes are identical")]
    SelfLoop { line: usize },
    #[error("line {line}: duplicate reaction (same reactant, product, and profile)")]
    DuplicateReaction { line: usize },
    #[error("network has no reactions")]
    Empty,
}

/// A formal nonnegative combination of species; zero coefficients are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Complex {
    coeffs: Vec<(usize, f64)>,
}

impl Complex {
    /// Build from (species index, coefficient) pairs. Entries with
    /// coefficient 0 are dropped; repeated species are summed.
    pub fn new(entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, c) in entries {
            assert!(c >= 0.0, "stoichiometric coefficients must be >= 0");
            *map.entry(i).or_insert(0.0) += c;
        }
        map.retain(|_, c| *c != 0.0);
        Self {
            coeffs: map.into_iter().collect(),
        }
    }

    /// Nonzero (species, coefficient) pairs, ordered by species index.
    pub fn coeffs(&self) -> &[(usize, f64)] {
        &self.coeffs
    }

    /// Coefficient of species `i` (0 when absent).
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs
            .iter()
            .find(|(j, _)| *j == i)
            .map_or(0.0, |(_, c)| *c)
    }

    /// Coefficient-wise equality within [`COMPLEX_EQ_TOL`].
    pub fn approx_eq(&self, other: &Self) -> bool {
        if self.coeffs.len() != other.coeffs.len() {
            return false;
        }
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .all(|(&(i, a), &(j, b))| i == j && (a - b).abs() <= COMPLEX_EQ_TOL)
    }

    /// Monomial u^y with the convention 0^0 = 1 (zero coefficients are
    /// absent, so only positive exponents are evaluated).
    pub fn monomial(&self, u: &[f64]) -> f64 {
        let mut prod = 1.0;
        for &(i, c) in &self.coeffs {
            let base = u[i];
            prod *= if c == 1.0 {
                base
            } else if c == 2.0 {
                base * base
            } else {
                base.powf(c)
            };
        }
        prod
    }

    /// Human-readable form like `S1 + 2 S2`.
    pub fn display(&self, species: &[String]) -> String {
        if self.coeffs.is_empty() {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        for &(i, c) in &self.coeffs {
            if c == 1.0 {
                parts.push(species[i].clone());
            } else if c.fract() == 0.0 && c.abs() < 1e15 {
                parts.push(format!("{} {}", c as i64, species[i]));
            } else {
                parts.push(format!("{} {}", c, species[i]));
            }
        }
        parts.join(" + ")
    }
}

/// A directed reaction between two complexes.
#[derive(Debug, Clone)]
pub struct Reaction {
    /// Index of the reactant complex.
    pub reactant: usize,
    /// Index of the product complex.
    pub product: usize,
    /// Rate constant, strictly positive.
    pub beta: f64,
    /// Index into [`ReactionNetwork::profiles`] of the spatial profile this
    /// reaction's rate scales with.
    pub profile: usize,
    /// Strongly connected component (0-based) of the reactant complex.
    pub component: usize,
}

/// Verdict of the no-cross-edges check on the complex graph.
#[derive(Debug, Clone)]
pub struct ComponentCheck {
    /// True when every reaction starts and ends in the same component.
    pub holds: bool,
    /// Reaction indices whose product lies in a different component.
    pub violations: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ReactionNetwork {
    species: Vec<String>,
    complexes: Vec<Complex>,
    reactions: Vec<Reaction>,
    profiles: Vec<String>,
    /// Stoichiometric matrix, m rows (species) by R columns (reactions);
    /// column r is product-minus-reactant of reaction r.
    stoich: Vec<Vec<f64>>,
    cons_basis: Vec<Vec<f64>>,
    /// Reaction index range of each component; empty ranges mark components
    /// that own no reactions (possible only when the cross-edge check fails).
    components: Vec<Range<usize>>,
    complex_component: Vec<usize>,
    warnings: Vec<String>,
}

impl ReactionNetwork {
    /// Assemble and analyze a network from raw parts. Reactions are given as
    /// (reactant complex id, product complex id, beta, profile id).
    pub fn from_parts(
        species: Vec<String>,
        complexes: Vec<Complex>,
        reactions: Vec<(usize, usize, f64, String)>,
        mut warnings: Vec<String>,
    ) -> Result<Self, ParseError> {
        for c in &complexes {
            for &(_, coeff) in c.coeffs() {
                if coeff > 0.0 && coeff < 1.0 {
                    warnings.push(format!(
                        "stoichiometric coefficient {coeff} is in (0,1); monomials are still evaluated"
                    ));
                }
            }
        }

        // Profile ids in order of first appearance.
        let mut profiles: Vec<String> = Vec::new();
        let mut prof_idx = Vec::with_capacity(reactions.len());
        for (_, _, _, pid) in &reactions {
            let idx = match profiles.iter().position(|p| p == pid) {
                Some(i) => i,
                None => {
                    profiles.push(pid.clone());
                    profiles.len() - 1
                }
            };
            prof_idx.push(idx);
        }

        // Strongly connected components of the complex graph.
        let n_complex = complexes.len();
        let mut adj = vec![Vec::new(); n_complex];
        for (r, p, _, _) in &reactions {
            adj[*r].push(*p);
        }
        let scc_of = tarjan_scc(&adj);
        let n_scc = scc_of.iter().copied().max().map_or(0, |m| m + 1);

        // Order components by the smallest original reaction index whose
        // reactant lies in them; components owning no reaction go last,
        // ordered by their smallest complex index.
        let mut first_reaction = vec![usize::MAX; n_scc];
        for (ri, (r, _, _, _)) in reactions.iter().enumerate() {
            let s = scc_of[*r];
            if ri < first_reaction[s] {
                first_reaction[s] = ri;
            }
        }
        let mut first_complex = vec![usize::MAX; n_scc];
        for (ci, &s) in scc_of.iter().enumerate() {
            if ci < first_complex[s] {
                first_complex[s] = ci;
            }
        }
        let mut order: Vec<usize> = (0..n_scc).collect();
        order.sort_by_key(|&s| (first_reaction[s], first_complex[s]));
        let mut rank = vec![0; n_scc];
        for (new_id, &s) in order.iter().enumerate() {
            rank[s] = new_id;
        }
        let complex_component: Vec<usize> = scc_of.iter().map(|&s| rank[s]).collect();

        // Relabel reactions: components become contiguous, original order is
        // preserved inside each component.
        let mut reaction_order: Vec<usize> = (0..reactions.len()).collect();
        reaction_order.sort_by_key(|&ri| (complex_component[reactions[ri].0], ri));
        let mut relabeled = Vec::with_capacity(reactions.len());
        let mut components: Vec<Range<usize>> = Vec::new();
        let mut prev_comp = usize::MAX;
        for (new_ri, &ri) in reaction_order.iter().enumerate() {
            let (r, p, beta, _) = &reactions[ri];
            let comp = complex_component[*r];
            if comp != prev_comp {
                while components.len() < comp {
                    // Reaction-less components (cross-edge targets).
                    components.push(new_ri..new_ri);
                }
                components.push(new_ri..new_ri);
                prev_comp = comp;
            }
            components[comp].end = new_ri + 1;
            relabeled.push(Reaction {
                reactant: *r,
                product: *p,
                beta: *beta,
                profile: prof_idx[ri],
                component: comp,
            });
        }
        while components.len() < n_scc {
            let end = relabeled.len();
            components.push(end..end);
        }

        // Stoichiometric matrix and conservation basis.
        let m = species.len();
        let mut stoich = vec![vec![0.0; relabeled.len()]; m];
        for (r, rx) in relabeled.iter().enumerate() {
            for &(i, c) in complexes[rx.product].coeffs() {
                stoich[i][r] += c;
            }
            for &(i, c) in complexes[rx.reactant].coeffs() {
                stoich[i][r] -= c;
            }
        }
        let cons_basis = conservation_basis(&stoich, KERNEL_TOL);

        let net = Self {
            species,
            complexes,
            reactions: relabeled,
            profiles,
            stoich,
            cons_basis,
            components,
            complex_component,
            warnings,
        };
        net.debug_check_basis();
        Ok(net)
    }

    fn debug_check_basis(&self) {
        for q in &self.cons_basis {
            let qn: f64 = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            for r in 0..self.reactions.len() {
                let mut dot = 0.0;
                let mut wn = 0.0;
                for i in 0..self.species.len() {
                    dot += q[i] * self.stoich[i][r];
                    wn += self.stoich[i][r] * self.stoich[i][r];
                }
                let bound = 1e-10 * (1.0 + qn * wn.sqrt());
                debug_assert!(
                    dot.abs() <= bound,
                    "conservation residual {dot} exceeds {bound}"
                );
            }
        }
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn complexes(&self) -> &[Complex] {
        &self.complexes
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn profiles(&self) -> &[String] {
        &self.profiles
    }

    /// Stoichiometric matrix as rows per species, columns per reaction.
    pub fn stoich(&self) -> &[Vec<f64>] {
        &self.stoich
    }

    pub fn stoich_rank(&self) -> usize {
        self.species.len() - self.cons_basis.len()
    }

    /// Conservation vectors q with q^T W = 0, integer-rescaled when possible.
    pub fn conservation_basis(&self) -> &[Vec<f64>] {
        &self.cons_basis
    }

    /// Reaction index range of each strongly connected component.
    pub fn components(&self) -> &[Range<usize>] {
        &self.components
    }

    /// Strongly connected component id of each complex. Component ids follow
    /// the reaction relabeling order.
    pub fn complex_components(&self) -> &[usize] {
        &self.complex_component
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Check that no reaction crosses between two components.
    pub fn check_cross_edges(&self) -> ComponentCheck {
        let violations: Vec<usize> = self
            .reactions
            .iter()
            .enumerate()
            .filter(|(_, rx)| {
                self.complex_component[rx.reactant] != self.complex_component[rx.product]
            })
            .map(|(i, _)| i)
            .collect();
        ComponentCheck {
            holds: violations.is_empty(),
            violations,
        }
    }

    /// True when all reactions of every component share one profile id, so
    /// that per-component rate fields k_r(x) = beta_r * alpha_l(x) exist.
    pub fn profiles_consistent(&self) -> bool {
        self.components.iter().all(|range| {
            let mut it = self.reactions[range.clone()].iter();
            match it.next() {
                None => true,
                Some(first) => it.all(|rx| rx.profile == first.profile),
            }
        })
    }

    /// Mass-action net production rates R_i(u) = sum_r k_r (y'_r,i - y_r,i) u^{y_r}.
    ///
    /// `k` holds one nonnegative rate value per reaction (in relabeled
    /// order). Rejects negative or non-finite inputs.
    pub fn mass_action_rates(&self, k: &[f64], u: &[f64]) -> Result<Vec<f64>, RateError> {
        if k.len() != self.reactions.len() {
            return Err(RateError::RateCount {
                expected: self.reactions.len(),
                got: k.len(),
            });
        }
        if u.len() != self.species.len() {
            return Err(RateError::SpeciesCount {
                expected: self.species.len(),
                got: u.len(),
            });
        }
        if let Some(&bad) = k.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(RateError::InvalidRate(bad));
        }
        if let Some(&bad) = u.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(RateError::InvalidConcentration(bad));
        }
        let mut out = vec![0.0; self.species.len()];
        self.rates_into(k, u, &mut out);
        Ok(out)
    }

    /// Unchecked fast path of [`Self::mass_action_rates`]; `out` is
    /// overwritten.
    pub(crate) fn rates_into(&self, k: &[f64], u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (r, rx) in self.reactions.iter().enumerate() {
            if k[r] == 0.0 {
                continue;
            }
            let flux = k[r] * self.complexes[rx.reactant].monomial(u);
            for &(i, c) in self.complexes[rx.product].coeffs() {
                out[i] += flux * c;
            }
            for &(i, c) in self.complexes[rx.reactant].coeffs() {
                out[i] -= flux * c;
            }
        }
    }

    /// Conserved totals of a per-species cell field: integral of q_j . u over
    /// the unit-measure domain, one value per conservation vector.
    pub fn conserved_totals(
        &self,
        concentrations: &[Vec<f64>],
        cell_measure: f64,
    ) -> Result<Vec<f64>, RateError> {
        if concentrations.len() != self.species.len() {
            return Err(RateError::SpeciesCount {
                expected: self.species.len(),
                got: concentrations.len(),
            });
        }
        let n_cells = concentrations.first().map_or(0, |f| f.len());
        if concentrations.iter().any(|f| f.len() != n_cells) {
            return Err(RateError::CellCountMismatch);
        }
        Ok(self
            .cons_basis
            .iter()
            .map(|q| {
                let mut total = 0.0;
                for (i, field) in concentrations.iter().enumerate() {
                    if q[i] != 0.0 {
                        total += q[i] * field.iter().sum::<f64>();
                    }
                }
                total * cell_measure
            })
            .collect())
    }

    /// Render back to the line-oriented text format (one reaction per line,
    /// in the relabeled order).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for rx in &self.reactions {
            let _ = writeln!(
                out,
                "{} -> {} @ {} {}",
                self.complexes[rx.reactant].display(&self.species),
                self.complexes[rx.product].display(&self.species),
                rx.beta,
                self.profiles[rx.profile],
            );
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum RateError {
    #[error("expected {expected} rate values, got {got}")]
    RateCount { expected: usize, got: usize },
    #[error("expected {expected} species values, got {got}")]
    SpeciesCount { expected: usize, got: usize },
    #[error("rate values must be finite and >= 0, got {0}")]
    InvalidRate(f64),
    #[error("concentrations must be finite and >= 0, got {0}")]
    InvalidConcentration(f64),
    #[error("per-species fields have differing cell counts")]
    CellCountMismatch,
}

/// Basis of ker(W^T) for a stoichiometric matrix given as rows per species.
/// Entries are rescaled to minimal positive integers when every entry of a
/// basis vector is close to a rational with denominator <= 12.
pub fn conservation_basis(stoich: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let m = stoich.len();
    if m == 0 {
        return Vec::new();
    }
    let n_reactions = stoich[0].len();
    // Rows of W^T are the reaction columns of W.
    let wt: Vec<Vec<f64>> = (0..n_reactions)
        .map(|r| (0..m).map(|i| stoich[i][r]).collect())
        .collect();
    let raw = linalg::kernel_basis(&wt, m, tol);
    raw.iter().map(|v| linalg::integerize(v, 12, 1e-6)).collect()
}

/// Tarjan's algorithm; returns the component id of each vertex (ids are in
/// no particular order, the caller re-ranks them).
fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<usize> {
    struct St<'a> {
        adj: &'a [Vec<usize>],
        index: usize,
        idx: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        comp: Vec<usize>,
        n_comp: usize,
    }
    fn connect(v: usize, st: &mut St) {
        st.idx[v] = Some(st.index);
        st.low[v] = st.index;
        st.index += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for &w in &st.adj[v] {
            if st.idx[w].is_none() {
                connect(w, st);
                st.low[v] = st.low[v].min(st.low[w]);
            } else if st.on_stack[w] {
                st.low[v] = st.low[v].min(st.idx[w].unwrap());
            }
        }
        if st.low[v] == st.idx[v].unwrap() {
            loop {
                let w = st.stack.pop().unwrap();
                st.on_stack[w] = false;
                st.comp[w] = st.n_comp;
                if w == v {
                    break;
                }
            }
            st.n_comp += 1;
        }
    }
    let n = adj.len();
    let mut st = St {
        adj,
        index: 0,
        idx: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        comp: vec![0; n],
        n_comp: 0,
    };
    for v in 0..n {
        if st.idx[v].is_none() {
            connect(v, &mut st);
        }
    }
    st.comp
}

/// Parse the line-oriented network format.
///
/// Grammar per line (after stripping `#` comments):
/// `<term> (+ <term>)* -> <term> (+ <term>)* @ <beta> <profile_id>`
/// with `<term>` = `[<coeff>] <species>`, coefficient default 1. The
/// reversible arrow `<=>` expands to two reactions sharing `beta`, or
/// carrying separate constants when written `@ <beta_fwd>,<beta_bwd>`.
pub fn parse_network(text: &str) -> Result<ReactionNetwork, ParseError> {
    let mut species: Vec<String> = Vec::new();
    let mut complexes: Vec<Complex> = Vec::new();
    let mut reactions: Vec<(usize, usize, f64, String)> = Vec::new();
    let warnings: Vec<String> = Vec::new();

    for (lineno, raw_line) in text.lines().enumerate() {
        let line_num = lineno + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        if line.trim().is_empty() {
            continue;
        }

        let col_of = |substr: &str| raw_line.find(substr).map_or(1, |p| p + 1);
        let syntax = |col: usize, msg: &str| ParseError::Syntax {
            line: line_num,
            col,
            msg: msg.to_string(),
        };

        let (at_left, rate_part) = match line.rfind('@') {
            Some(pos) => (&line[..pos], &line[pos + 1..]),
            None => return Err(syntax(line.len(), "missing '@ <beta> <profile>'")),
        };

        let reversible = at_left.contains("<=>");
        let (lhs, rhs) = if reversible {
            let mut it = at_left.splitn(2, "<=>");
            (it.next().unwrap(), it.next().unwrap())
        } else {
            match at_left.find("->") {
                Some(pos) => (&at_left[..pos], &at_left[pos + 2..]),
                None => return Err(syntax(1, "missing reaction arrow '->' or '<=>'")),
            }
        };

        let mut rate_tokens = rate_part.split_whitespace();
        let beta_tok = rate_tokens
            .next()
            .ok_or_else(|| syntax(col_of("@"), "missing rate constant after '@'"))?;
        let profile = rate_tokens
            .next()
            .ok_or_else(|| syntax(col_of("@"), "missing profile id after rate constant"))?
            .to_string();
        if let Some(extra) = rate_tokens.next() {
            return Err(syntax(col_of(extra), "unexpected trailing tokens"));
        }
        if !profile
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic())
            || !profile.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            return Err(syntax(col_of(&profile), "invalid profile id"));
        }

        let betas: Vec<f64> = beta_tok
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| syntax(col_of(tok), "invalid rate constant"))
            })
            .collect::<Result<_, _>>()?;
        let (beta_fwd, beta_bwd) = match (reversible, betas.as_slice()) {
            (_, [b]) => (*b, *b),
            (true, [bf, bb]) => (*bf, *bb),
            (false, _) => return Err(syntax(col_of(beta_tok), "one rate constant expected")),
            (true, _) => {
                return Err(syntax(
                    col_of(beta_tok),
                    "reversible reactions take one or two rate constants",
                ))
            }
        };
        for &b in &[beta_fwd, beta_bwd][..if reversible { 2 } else { 1 }] {
            if !b.is_finite() || b <= 0.0 {
                return Err(ParseError::NonPositiveBeta { line: line_num, beta: b });
            }
        }

        let mut parse_side = |side: &str| -> Result<usize, ParseError> {
            let mut entries: Vec<(usize, f64)> = Vec::new();
            for term in side.split('+') {
                let tokens: Vec<&str> = term.split_whitespace().collect();
                let (coeff, name) = match tokens.as_slice() {
                    [name] => (1.0, *name),
                    [coeff, name] => {
                        let coeff: f64 = coeff
                            .parse()
                            .map_err(|_| syntax(col_of(coeff), "invalid coefficient"))?;
                        (coeff, *name)
                    }
                    [] => return Err(syntax(col_of(side.trim()), "empty term")),
                    _ => return Err(syntax(col_of(tokens[2]), "too many tokens in term")),
                };
                if !coeff.is_finite() || coeff < 0.0 {
                    return Err(syntax(col_of(name), "coefficient must be >= 0"));
                }
                if !name
                    .chars()
                    .next()
                    .is_some_and(|c| c.is_ascii_alphabetic())
                    || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                {
                    return Err(syntax(col_of(name), "invalid species name"));
                }
                let idx = match species.iter().position(|s| s == name) {
                    Some(i) => i,
                    None => {
                        species.push(name.to_string());
                        species.len() - 1
                    }
                };
                entries.push((idx, coeff));
            }
            let complex = Complex::new(entries);
            let id = match complexes.iter().position(|c| c.approx_eq(&complex)) {
                Some(i) => i,
                None => {
                    complexes.push(complex);
                    complexes.len() - 1
                }
            };
            Ok(id)
        };

        let reactant = parse_side(lhs)?;
        let product = parse_side(rhs)?;
        if reactant == product {
            return Err(ParseError::SelfLoop { line: line_num });
        }

        let mut push = |r: usize, p: usize, beta: f64| -> Result<(), ParseError> {
            if reactions
                .iter()
                .any(|(er, ep, _, eprof)| *er == r && *ep == p && *eprof == profile)
            {
                return Err(ParseError::DuplicateReaction { line: line_num });
            }
            reactions.push((r, p, beta, profile.clone()));
            Ok(())
        };
        push(reactant, product, beta_fwd)?;
        if reversible {
            push(product, reactant, beta_bwd)?;
        }
    }

    if reactions.is_empty() {
        return Err(ParseError::Empty);
    }
    ReactionNetwork::from_parts(species, complexes, reactions, warnings)
}

/// Component assignment of each complex (same data as
/// [`ReactionNetwork::complex_components`], exposed as an owned vector).
pub fn linkage_decompose(net: &ReactionNetwork) -> Vec<usize> {
    net.complex_components().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::testnets::{FIG1A, SPECIAL};

    #[test]
    fn parses_minimal_reversible_pair() {
        let net = parse_network("S1 -> 2 S2 @ 1 p1 \n 2 S2 -> S1 @ 1 p1").unwrap();
        assert_eq!(net.n_species(), 2);
        assert_eq!(net.reactions().len(), 2);
        assert_eq!(net.complexes().len(), 2);
        assert_eq!(net.components().len(), 1);
    }

    #[test]
    fn figure_networks_have_expected_structure() {
        let net = parse_network(FIG1A).unwrap();
        assert_eq!(net.n_species(), 3);
        assert_eq!(net.reactions().len(), 5);
        assert_eq!(net.complexes().len(), 5);
        assert_eq!(net.components().len(), 2);
        assert_eq!(net.components()[0], 0..3);
        assert_eq!(net.components()[1], 3..5);
        assert!(net.check_cross_edges().holds);
    }

    #[test]
    fn rejects_nonpositive_beta() {
        let err = parse_network("S1 -> S2 @ -1 p1").unwrap_err();
        assert!(matches!(err, ParseError::NonPositiveBeta { .. }));
        let err = parse_network("S1 -> S2 @ 0 p1").unwrap_err();
        assert!(matches!(err, ParseError::NonPositiveBeta { .. }));
    }

    #[test]
    fn rejects_duplicates_and_self_loops() {
        let err = parse_network("S1 -> S2 @ 1 p1\nS1 -> S2 @ 2 p1").unwrap_err();
        assert!(matches!(err, ParseError::DuplicateReaction { .. }));
        let err = parse_network("S1 -> S1 @ 1 p1").unwrap_err();
        assert!(matches!(err, ParseError::SelfLoop { .. }));
    }

    #[test]
    fn reports_syntax_error_position() {
        let err = parse_network("S1 -> S2").unwrap_err();
        match err {
            ParseError::Syntax { line, .. } => assert_eq!(line, 1),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn special_system_conservation_vector() {
        let net = parse_network(SPECIAL).unwrap();
        assert_eq!(net.conservation_basis(), &[vec![4.0, 2.0, 1.0]]);
    }

    #[test]
    fn zero_stoichiometry_gives_full_kernel() {
        // A degenerate W = 0 (m=2, R=1): kernel is all of R^2.
        let basis = conservation_basis(&[vec![0.0], vec![0.0]], 1e-10);
        assert_eq!(basis, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn chain_has_singleton_components_and_cross_edges() {
        let net = parse_network("A -> B @ 1 p1\nB -> C @ 1 p1").unwrap();
        assert_eq!(net.components().len(), 3);
        let check = net.check_cross_edges();
        assert!(!check.holds);
        assert_eq!(check.violations, vec![0, 1]);
    }

    #[test]
    fn empty_reaction_list_is_an_error() {
        assert!(matches!(parse_network("# nothing"), Err(ParseError::Empty)));
    }

    #[test]
    fn single_reversible_reaction_is_one_component() {
        let net = parse_network("A <=> B @ 1 p1").unwrap();
        assert_eq!(net.components().len(), 1);
        assert_eq!(linkage_decompose(&net), vec![0, 0]);
    }

    #[test]
    fn mass_action_rates_on_two_species_exchange() {
        // S1 <=> S2 with unit rates at u = (2,3): R = (-2+3, 2-3) = (1,-1).
        let net = parse_network("S1 <=> S2 @ 1 p1").unwrap();
        let rates = net.mass_action_rates(&[1.0, 1.0], &[2.0, 3.0]).unwrap();
        assert_eq!(rates, vec![1.0, -1.0]);
        // k = 0 kills all rates.
        let rates = net.mass_action_rates(&[0.0, 0.0], &[2.0, 3.0]).unwrap();
        assert_eq!(rates, vec![0.0, 0.0]);
    }

    #[test]
    fn rates_vanish_at_balanced_state() {
        let net = parse_network(SPECIAL).unwrap();
        let rates = net
            .mass_action_rates(&[1.0; 4], &[1.0, 1.0, 1.0])
            .unwrap();
        for r in rates {
            assert!(r.abs() < 1e-15);
        }
    }

    #[test]
    fn rates_reject_bad_input() {
        let net = parse_network("S1 <=> S2 @ 1 p1").unwrap();
        assert!(net.mass_action_rates(&[1.0, 1.0], &[-1.0, 2.0]).is_err());
        assert!(net
            .mass_action_rates(&[1.0, f64::NAN], &[1.0, 2.0])
            .is_err());
    }

    #[test]
    fn conserved_totals_of_uniform_state() {
        let net = parse_network(SPECIAL).unwrap();
        let fields = vec![vec![1.0; 8], vec![1.0; 8], vec![1.0; 8]];
        let totals = net.conserved_totals(&fields, 1.0 / 8.0).unwrap();
        assert!((totals[0] - 7.0).abs() < 1e-14);
        let zero = vec![vec![0.0; 8]; 3];
        assert_eq!(net.conserved_totals(&zero, 1.0 / 8.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn round_trip_preserves_structure() {
        for text in [FIG1A, SPECIAL] {
            let net = parse_network(text).unwrap();
            let net2 = parse_network(&net.to_text()).unwrap();
            assert_eq!(net.species(), net2.species());
            assert_eq!(net.stoich(), net2.stoich());
            assert_eq!(net.components(), net2.components());
            assert_eq!(net.conservation_basis(), net2.conservation_basis());
        }
    }

    #[test]
    fn fractional_coefficients_warn_but_parse() {
        let net = parse_network("0.5 A -> B @ 1 p1").unwrap();
        assert!(!net.warnings().is_empty());
    }
}
