mod common;

use common::{brute_force_betweenness, is_connected, random_connected_graph, random_graph};
use neural_core::graphs::{
    betweenness_centrality, build_visual_graph, entity_embedding, fuse, parse_knowledge_graph, Adjacency, EntityRecord,
    GraphError, KgDocument, KnowledgeGraph, Modality, RelationRecord, VisualGraph,
};
use neural_core::patch_grid::{tile_image, GrayImage, PatchGrid};
use neural_core::rng::SplitMix64;
use neural_core::{PrunedSet, PruningPolicy};
use num_rational::Ratio;

fn grid(rows: usize, cols: usize) -> PatchGrid<f64> {
    let pixels = (0..rows * cols * 16).map(|i| (i % 7) as f64 / 7.0).collect();
    tile_image(&GrayImage::new(rows * 4, cols * 4, pixels).unwrap(), 4).unwrap()
}

fn keep(grid: &PatchGrid<f64>, retained: Vec<usize>) -> VisualGraph<f64> {
    let pruned = PrunedSet::new(retained, grid.len(), PruningPolicy::Threshold { tau: 0.0 }).unwrap();
    build_visual_graph(grid, &pruned).unwrap()
}

fn brute_edge_count(cols: usize, retained: &[usize]) -> usize {
    let mut count = 0;
    for (i, &a) in retained.iter().enumerate() {
        for &b in &retained[i + 1..] {
            let (ra, ca) = ((a / cols) as i64, (a % cols) as i64);
            let (rb, cb) = ((b / cols) as i64, (b % cols) as i64);
            if (ra - rb).abs() <= 1 && (ca - cb).abs() <= 1 {
                count += 1;
            }
        }
    }
    count
}

#[test]
fn visual_edges_match_brute_force_on_every_subset() {
    for (rows, cols) in [(2, 2), (3, 3), (2, 3)] {
        let g = grid(rows, cols);
        let n = rows * cols;
        for mask in 1u32..(1 << n) {
            let retained: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let v = keep(&g, retained.clone());
            assert_eq!(v.edges().len(), brute_edge_count(cols, &retained), "{rows}x{cols} mask {mask:b}");
            assert_eq!(v.nodes().len(), retained.len());
        }
    }
}

#[test]
fn visual_edges_match_brute_force_on_random_subsets_of_5x5() {
    let g = grid(5, 5);
    let mut rng = SplitMix64::new(55);
    for _ in 0..300 {
        let retained: Vec<usize> = (0..25).filter(|_| rng.next_f64() < 0.5).collect();
        if retained.is_empty() {
            continue;
        }
        assert_eq!(keep(&g, retained.clone()).edges().len(), brute_edge_count(5, &retained));
    }
}

#[test]
fn visual_graph_examples() {
    let g = grid(3, 3);
    assert_eq!(keep(&g, vec![0, 4]).edges(), &[(0, 1)]);
    let single = keep(&g, vec![5]);
    assert_eq!((single.nodes().len(), single.edges().len()), (1, 0));
    assert_eq!(keep(&g, (0..9).collect()).edges().len(), 20);
    assert_eq!(single.nodes()[0].feature, g.patches()[5].feature);
}

#[test]
fn visual_graph_rejects_foreign_pruned_set() {
    let g = grid(3, 3);
    let pruned = PrunedSet::new(vec![0], 10, PruningPolicy::TopK { fraction: 0.1 }).unwrap();
    assert!(matches!(build_visual_graph(&g, &pruned), Err(GraphError::GridMismatch { .. })));
}

fn brandes_exact(n: usize, edges: &[(usize, usize)]) -> Vec<Ratio<i64>> {
    betweenness_centrality::<Ratio<i64>>(&Adjacency::from_edges(n, edges.iter().copied())).into_scores()
}

fn assert_matches_oracle(n: usize, edges: &[(usize, usize)]) {
    let oracle = brute_force_betweenness(n, edges);
    let exact = brandes_exact(n, edges);
    let doubled: Vec<Ratio<i64>> = exact.iter().map(|s| s * 2).collect();
    assert_eq!(doubled, oracle, "n={n} edges={edges:?}");
    let float = betweenness_centrality::<f64>(&Adjacency::from_edges(n, edges.iter().copied()));
    for (f, o) in float.scores().iter().zip(&oracle) {
        let o = *o.numer() as f64 / *o.denom() as f64;
        assert!((2.0 * f - o).abs() < 1e-9, "{f} vs {o}");
    }
}

#[test]
fn brandes_matches_oracle_on_every_graph_up_to_five_nodes() {
    for n in 1..=5usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<_> = pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e).collect();
            assert_matches_oracle(n, &edges);
        }
    }
}

#[test]
fn brandes_matches_oracle_on_sampled_connected_graphs() {
    let mut rng = SplitMix64::new(8);
    for n in 1..=8 {
        for extra in [0.0, 0.15, 0.4, 0.8] {
            for _ in 0..15 {
                let edges = random_connected_graph(&mut rng, n, extra);
                assert!(is_connected(n, &edges));
                assert_matches_oracle(n, &edges);
            }
        }
    }
}

#[test]
fn brandes_matches_oracle_on_random_graphs() {
    let mut rng = SplitMix64::new(12);
    let mut disconnected = 0;
    for _ in 0..200 {
        let n = 1 + rng.below(12) as usize;
        let p = rng.uniform(0.05, 0.7);
        let edges = random_graph(&mut rng, n, p);
        disconnected += usize::from(!is_connected(n, &edges));
        assert_matches_oracle(n, &edges);
    }
    assert!(disconnected > 20, "sampler should cover disconnected graphs, got {disconnected}");
}

#[test]
fn betweenness_examples() {
    let path = brandes_exact(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
    assert_eq!(path, [0, 3, 4, 3, 0].map(Ratio::from_integer));
    let star = betweenness_centrality::<f64>(&Adjacency::from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)]));
    assert_eq!(star.scores(), &[6.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(star.argmax(), Some(0));
    let k4: Vec<_> = (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b))).collect();
    assert!(brandes_exact(4, &k4).iter().all(|s| *s == Ratio::from_integer(0)));
}

#[test]
fn argmax_is_scale_invariant_and_prefers_lowest_index() {
    let mut rng = SplitMix64::new(3);
    for _ in 0..100 {
        let n = 1 + rng.below(10) as usize;
        let edges = random_graph(&mut rng, n, 0.4);
        let scores = betweenness_centrality::<f64>(&Adjacency::from_edges(n, edges.iter().copied()));
        let best = scores.argmax().unwrap();
        let max = scores.scores().iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(best, scores.scores().iter().position(|&s| s == max).unwrap());
        let scaled: Vec<f64> = scores.scores().iter().map(|s| s * 3.5).collect();
        let scaled_best = scaled.iter().enumerate().fold(0, |b, (i, &s)| if s > scaled[b] { i } else { b });
        assert_eq!(scaled_best, best);
    }
}

fn random_kg(rng: &mut SplitMix64, n: usize, dim: usize) -> (KgDocument, KnowledgeGraph<f64>) {
    let entities = (0..n)
        .map(|i| EntityRecord {
            id: format!("e{i}"),
            text: format!("finding {}", rng.below(1000)),
            label: "OBS-DP".into(),
        })
        .collect();
    let relations = random_graph(rng, n, 0.4)
        .into_iter()
        .map(|(a, b)| RelationRecord { src: format!("e{a}"), dst: format!("e{b}"), label: "modify".into() })
        .collect();
    let doc = KgDocument { entities, relations };
    let kg = KnowledgeGraph::from_document(&doc, dim).unwrap();
    (doc, kg)
}

fn oracle_argmax(n: usize, edges: &[(usize, usize)]) -> usize {
    let scores = brute_force_betweenness(n, edges);
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

#[test]
fn fusion_contract_on_seeded_pairs() {
    let mut rng = SplitMix64::new(100);
    for _ in 0..100 {
        let (rows, cols) = (1 + rng.below(5) as usize, 1 + rng.below(5) as usize);
        let g = grid(rows, cols);
        let mut retained: Vec<usize> = (0..g.len()).filter(|_| rng.next_f64() < 0.6).collect();
        if retained.is_empty() {
            retained.push(rng.below(g.len() as u64) as usize);
        }
        let visual = keep(&g, retained);
        let n = 1 + rng.below(7) as usize;
        let (_, kg) = random_kg(&mut rng, n, 32);
        let kg_edges: Vec<_> = kg.edges().iter().map(|r| (r.a, r.b)).collect();

        let u = fuse(&visual, &kg, 40).unwrap();
        let nv = visual.nodes().len();
        assert_eq!(u.node_count(), nv + kg.nodes().len());
        assert_eq!(u.edge_count(), visual.edges().len() + kg.edges().len() + 1);
        let cross: Vec<_> =
            u.edges().iter().filter(|&&(a, b)| u.nodes()[a].modality != u.nodes()[b].modality).collect();
        assert_eq!(cross.len(), 1);
        let expected = (oracle_argmax(nv, visual.edges()), nv + oracle_argmax(kg.nodes().len(), &kg_edges));
        assert_eq!(u.bridge(), expected);
        assert_eq!(*cross[0], expected);
        assert_eq!(u.count_modality(Modality::Visual), nv);
        assert!(u.nodes().iter().all(|n| n.feature.dim() == 40));
    }
}

#[test]
fn fusion_examples() {
    // a 1x5 strip is a path; the middle patch has the highest betweenness
    let strip = grid(1, 5);
    let path = keep(&strip, (0..5).collect());
    let star = KgDocument {
        entities: (0..5)
            .map(|i| EntityRecord { id: format!("e{i}"), text: format!("t{i}"), label: "L".into() })
            .collect(),
        relations: (1..5)
            .map(|i| RelationRecord { src: "e0".into(), dst: format!("e{i}"), label: "r".into() })
            .collect(),
    };
    let kg = KnowledgeGraph::<f64>::from_document(&star, 8).unwrap();
    let u = fuse(&path, &kg, 8).unwrap();
    assert_eq!(u.bridge(), (2, 5));

    let single = keep(&grid(3, 3), vec![7]);
    let u = fuse(&single, &kg, 8).unwrap();
    assert_eq!(u.bridge(), (0, 1));
    assert_eq!(u.nodes()[0].origin, 7);
}

#[test]
fn knowledge_graph_parse_examples() {
    let two =
        br#"{"entities":[{"id":"e1","text":"opacity","label":"OBS-DP"},{"id":"e2","text":"lung","label":"ANAT-DP"}],
                   "relations":[{"src":"e1","dst":"e2","label":"located_at"}]}"#;
    let kg = parse_knowledge_graph::<f64>(two, 64).unwrap();
    assert_eq!((kg.nodes().len(), kg.edges().len()), (2, 1));

    let dangling = br#"{"entities":[{"id":"e1","text":"opacity","label":"OBS-DP"}],
                        "relations":[{"src":"e1","dst":"e9","label":"modify"}]}"#;
    assert!(matches!(parse_knowledge_graph::<f64>(dangling, 64), Err(GraphError::DanglingRelation { .. })));
    let empty = br#"{"entities":[],"relations":[]}"#;
    assert_eq!(parse_knowledge_graph::<f64>(empty, 64).unwrap_err(), GraphError::EmptyGraph);
    assert!(matches!(parse_knowledge_graph::<f64>(b"{", 64), Err(GraphError::MalformedDocument(_))));
}

#[test]
fn knowledge_graph_document_roundtrip() {
    let mut rng = SplitMix64::new(21);
    for _ in 0..50 {
        let n = 1 + rng.below(6) as usize;
        let (_, kg) = random_kg(&mut rng, n, 16);
        let again = KnowledgeGraph::<f64>::from_document(&kg.to_document(), 16).unwrap();
        assert_eq!(again, kg);
    }
}

#[test]
fn embeddings_are_unit_and_distinct() {
    let words = ["opacity", "effusion", "pneumothorax", "right lower lobe", "heart", "ab"];
    for w in words {
        let e = entity_embedding::<f64>(w, "OBS-DP", 64).unwrap();
        let norm: f64 = e.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert_eq!(e, entity_embedding::<f64>(w, "OBS-DP", 64).unwrap());
    }
    let a = entity_embedding::<f64>("opacity", "OBS-DP", 64).unwrap();
    let b = entity_embedding::<f64>("effusion", "OBS-DP", 64).unwrap();
    let cos: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    assert!(cos < 0.9, "{cos}");
}
