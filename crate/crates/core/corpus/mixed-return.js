// pick() returns an int for a while, then a string.
function pick(i) {
    if (i < 5)
        return i;
    return "s" + "x";
}

function consume(n) {
    var i = 0;
    var acc = 0;
    while (i < n) {
        var v = pick(i);
        if (v == "sx")
            acc = acc + 1;
        else
            acc = acc + v;
        i = i + 1;
    }
    return acc;
}

print(consume(10));

function benchmarkRun() {
    return consume(50);
}
