fn main() {
    let e = silentwave::eval::wer("a b c d e f g h i j", "a b x d y f g h j k").unwrap();
    println!("{e:?}");
}
