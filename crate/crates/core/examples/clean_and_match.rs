//! Text cleaning, lexicon rule matching and sentence-pair construction.

use finkey::corpus::{build_pair_dataset, clean_text, rule_match_entities, Document, Lexicon};

fn main() -> finkey::Result<()> {
    let raw = "Acme Bank  was fined\tby regulators, see https://news.example/a1 \u{200B}while Zeta Trust grew.";
    let cleaned = clean_text(raw);
    println!("raw:     {raw:?}");
    println!("cleaned: {cleaned:?}");

    let lexicon = Lexicon::new(["Acme Bank", "Zeta Trust", "Orion Capital", "Acme"])?;
    let found = rule_match_entities(&cleaned, &lexicon);
    println!("lexicon hits: {found:?}");

    let doc = Document::new("d1", raw).with_entities(found.clone(), vec!["Acme Bank".to_string()]);
    doc.validate().map_err(finkey::Error::InvalidInput)?;
    for pair in build_pair_dataset(&[doc]).examples {
        println!("({}, {:?}) -> key: {:?}", pair.entity, pair.text, pair.label);
    }
    Ok(())
}
