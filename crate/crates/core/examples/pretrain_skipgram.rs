//! Skip-gram with negative sampling on a corpus of two vocabularies that
//! never share a sentence, then a save/load round trip of the vectors.
//!
//! cargo run --release --example pretrain_skipgram

use textent::sgns::{SgnsConfig, SkipGram};
use textent::synthetic::two_clique_stream;
use textent::vectors::{cosine, load_vectors, save_vectors};

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn main() -> textent::Result<()> {
    let (stream, a, b) = two_clique_stream(10, 2000, 10, 3);
    let config = SgnsConfig {
        dim: 20,
        window: 5,
        negatives: 5,
        min_count: 1,
        ..Default::default()
    };
    let mut model = SkipGram::new(&stream, config)?;
    for (epoch, loss) in model.train(&stream).iter().enumerate() {
        println!("epoch {}: mean pair loss {loss:.4}", epoch + 1);
    }
    let store = model.to_store();

    let v = |t: &String| store.get(t).expect("in vocabulary").to_vec();
    let mut intra = Vec::new();
    for clique in [&a, &b] {
        for (i, x) in clique.iter().enumerate() {
            for y in &clique[i + 1..] {
                intra.push(cosine(&v(x), &v(y)));
            }
        }
    }
    let inter: Vec<f64> = a.iter().flat_map(|x| b.iter().map(|y| cosine(&v(x), &v(y)))).collect();
    println!("mean cosine within a clique {:.3}, across cliques {:.3}", mean(&intra), mean(&inter));

    let path = std::env::temp_dir().join("textent-cliques.vec");
    save_vectors(&store, &path)?;
    let back = load_vectors(&path)?;
    println!("{} vectors round-tripped through {}: {}", back.len(), path.display(), back == store);
    Ok(())
}
