// x reaches the final test with eight different tags.
function classify(k) {
    var x;
    if (k == 0) x = 1;
    else if (k == 1) x = 1.5;
    else if (k == 2) x = "s";
    else if (k == 3) x = null;
    else if (k == 4) x = true;
    else if (k == 5) x = [1];
    else if (k == 6) x = {a: 1};
    else x = function () { return 1; };
    if (x == x)
        return k;
    return -1;
}

function benchmarkRun() {
    var i = 0;
    var s = 0;
    while (i < 16) {
        s = s + classify(i % 8);
        i = i + 1;
    }
    return s;
}

print(benchmarkRun());
