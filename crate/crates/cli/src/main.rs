fn main() {
    eprintln!("pairvqe: no runners wired up yet");
    std::process::exit(2);
}
