//! Corpus BLEU-4 over whitespace tokens, plus Han-character tokenization for
//! Chinese.
//!
//! ```text
//! cargo run --example bleu_score
//! ```

use qaforge::metrics::{bleu_tokens, corpus_bleu};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hypotheses = [
        "wo entspringt der Fluss Tees",
        "wann wurde die Brücke gebaut",
    ];
    let references = ["wo entspringt der Tees", "wann wurde die Brücke gebaut"];
    let hyp: Vec<Vec<String>> = hypotheses.iter().map(|s| bleu_tokens(s, "de")).collect();
    let refs: Vec<Vec<String>> = references.iter().map(|s| bleu_tokens(s, "de")).collect();
    let score = corpus_bleu(&hyp, &refs, 4)?;
    println!(
        "BLEU {:.2}  precisions {:?}  BP {:.4}",
        score.score, score.precisions, score.brevity_penalty
    );

    let zh_h = vec![bleu_tokens("泰晤士河发源于哪里", "zh")];
    let zh_r = vec![bleu_tokens("泰晤士河发源于何处", "zh")];
    println!("zh tokens {:?}", zh_h[0]);
    println!("zh BLEU {:.2}", corpus_bleu(&zh_h, &zh_r, 4)?.score);
    Ok(())
}
