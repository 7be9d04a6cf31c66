function build(n) {
    var parts = ["a", "bc", "def"];
    var out = "";
    var i = 0;
    while (i < n) {
        out = out + parts[i % parts.length];
        i = i + 1;
    }
    return out;
}

function benchmarkRun() {
    var s = build(300);
    var t = build(300);
    if (s == t)
        return s.length;
    return -1;
}

print(benchmarkRun());
