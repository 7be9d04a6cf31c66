function sieve(n) {
    var flags = [];
    var i = 0;
    while (i <= n) {
        flags[i] = true;
        i = i + 1;
    }
    var count = 0;
    i = 2;
    while (i <= n) {
        if (flags[i]) {
            count = count + 1;
            var j = i + i;
            while (j <= n) {
                flags[j] = false;
                j = j + i;
            }
        }
        i = i + 1;
    }
    return count;
}

function benchmarkRun() {
    return sieve(5000);
}

print(benchmarkRun());
