from ngc_generative_coding.main import main

if __name__ == '__main__':
    main()
