//! Hitting-set tree enumeration of minimal losing sub-cubes.

use std::collections::HashSet;

use crate::formula::{Cube, Lit};

/// Enumerates locally minimal sub-cubes of `cex` satisfying the monotone
/// predicate `losing` (true for `cex` itself). Each tree node removes a set of
/// literals that hits every sub-cube found so far; `shrink` turns a losing
/// candidate into a locally minimal one. Stops after `node_limit` nodes.
pub fn all_minimal<E>(
    cex: &Cube,
    first: Option<Cube>,
    node_limit: usize,
    mut losing: impl FnMut(&Cube) -> Result<bool, E>,
    mut shrink: impl FnMut(&Cube) -> Result<Cube, E>,
) -> Result<Vec<Cube>, E> {
    let mut found: Vec<Cube> = Vec::new();
    let root = match first {
        Some(c) => c,
        None => shrink(cex)?,
    };
    found.push(root);
    let mut seen: HashSet<Vec<Lit>> = HashSet::new();
    let mut queue: Vec<Vec<Lit>> = found[0].lits().iter().map(|&l| vec![l]).collect();
    let mut nodes = 1;
    while let Some(hit) = queue.pop() {
        if nodes >= node_limit {
            break;
        }
        if !seen.insert(hit.clone()) {
            continue;
        }
        // A known sub-cube disjoint from `hit` already labels this node.
        let reuse = found
            .iter()
            .find(|c| c.lits().iter().all(|l| !hit.contains(l)))
            .cloned();
        let label = match reuse {
            Some(c) => c,
            None => {
                nodes += 1;
                let candidate = Cube::new(cex.lits().iter().copied().filter(|l| !hit.contains(l)))
                    .expect("sub-cube");
                if !losing(&candidate)? {
                    continue;
                }
                let core = shrink(&candidate)?;
                found.push(core.clone());
                core
            }
        };
        for &l in label.lits() {
            let mut child = hit.clone();
            child.push(l);
            child.sort_unstable();
            queue.push(child);
        }
    }
    Ok(found)
}

/// Drops literals in ascending variable order while `losing` stays true.
pub fn drop_literals<E>(cube: &Cube, mut losing: impl FnMut(&Cube) -> Result<bool, E>) -> Result<Cube, E> {
    let mut current = cube.clone();
    for &l in cube.lits() {
        let trial = current.without(l);
        if losing(&trial)? {
            current = trial;
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn cube(lits: &[i64]) -> Cube {
        Cube::new(lits.iter().map(|&x| Lit::from_dimacs(x))).unwrap()
    }

    /// Losing iff the cube contains one of the given cores.
    fn oracle(cores: &[Cube]) -> impl Fn(&Cube) -> Result<bool, Infallible> + '_ {
        move |c| Ok(cores.iter().any(|k| k.lits().iter().all(|&l| c.contains(l))))
    }

    #[test]
    fn finds_all_disjoint_cores() {
        let cores = [cube(&[1]), cube(&[2, 3])];
        let cex = cube(&[1, 2, 3]);
        let losing = oracle(&cores);
        let mut found = all_minimal(&cex, None, 100, &losing, |c| drop_literals(c, &losing)).unwrap();
        found.sort();
        let mut expected = cores.to_vec();
        expected.sort();
        assert_eq!(found, expected);
    }

    #[test]
    fn single_core_and_single_literal() {
        let cores = [cube(&[-2])];
        let losing = oracle(&cores);
        let found = all_minimal(&cube(&[1, -2, 3]), None, 100, &losing, |c| drop_literals(c, &losing)).unwrap();
        assert_eq!(found, vec![cube(&[-2])]);
        let found = all_minimal(&cube(&[-2]), None, 100, &losing, |c| drop_literals(c, &losing)).unwrap();
        assert_eq!(found, vec![cube(&[-2])]);
    }

    #[test]
    fn overlapping_cores() {
        let cores = [cube(&[1, 2]), cube(&[2, 3]), cube(&[1, 4])];
        let losing = oracle(&cores);
        let mut found =
            all_minimal(&cube(&[1, 2, 3, 4]), None, 100, &losing, |c| drop_literals(c, &losing)).unwrap();
        found.sort();
        let mut expected = cores.to_vec();
        expected.sort();
        assert_eq!(found, expected);
    }
}
